#pragma once

#include <cstddef>
#include <vector>

#include "fgfm/encoder.hpp"
#include "fgfm/mhv.hpp"
#include "fgfm/rng.hpp"
#include "fgfm/tensor.hpp"

namespace fgfm {

// Cross-layer refinement: two extra encoder blocks over the frames selected
// from the main stack, a pair of cross-attentions between their outputs, and
// a fusion block that produces the enriched classification token.

struct StreamProjections {
  Tensor wq, bq, wk, bk, wv, bv;
};

// Independent Q/K/V projections per stream; single-head, scale 1/sqrt(D).
struct DualAttentionParams {
  StreamProjections cross, refined;
};

// Fusion block: layer norm, expansion linear, GELU, depthwise conv of width 3
// along the sequence (classification-token rows bypass it via identity and
// the two frame runs are convolved independently), projection back to D,
// residual with the concatenated input.
struct DaffParams {
  LayerNormParams ln;
  Tensor w1, b1;        // D -> expansion*D
  Tensor conv_kernel;   // [expansion*D, 3]
  Tensor conv_bias;     // [expansion*D]
  Tensor w2, b2;        // expansion*D -> D
};

struct ClrParams {
  DualAttentionParams attention;
  DaffParams daff;

  void collect(std::vector<Tensor>& out) const;
};

DualAttentionParams init_dual_attention(std::size_t embed_dim, Rng& rng);
DaffParams init_daff(std::size_t embed_dim, std::size_t expansion, Rng& rng);
ClrParams init_clr_params(const EncoderConfig& cfg, Rng& rng);

// Row 0 = the classification token produced by the last main block; then all
// selected frames in block order, each block's frames in ascending frame
// order. Output shape [1 + L*v, D].
Tensor build_cross_input(const Tensor& cls_last,
                         const std::vector<SelectionResult>& selections);

struct CrossBlockResult {
  Tensor f_cross;       // [1+v, D]: the block's CLS then its selected frames
  SelectionResult sel;  // the second-stage selection
  BlockOutput block;    // full block output, kept for inspection
};

// Runs the first extra block over the concatenated selection sequence, then
// votes again over its candidate rows to keep v of them.
CrossBlockResult cross_layer_block(const Tensor& x_in, const BlockParams& p,
                                   const EncoderConfig& cfg, std::size_t v,
                                   bool enhancement_enabled = true);

// Runs the second extra block over [cls_last; re-selected frames]; the full
// output is the refined feature (no further voting).
Tensor refine_block(const Tensor& cls_last, const SelectionResult& sel,
                    const BlockParams& p, const EncoderConfig& cfg);

struct DualAttentionResult {
  Tensor h_cross, h_refined;          // [1+v, D] each
  Tensor attn_cross, attn_refined;    // post-softmax maps, for inspection
};

DualAttentionResult dual_cross_attention(const Tensor& f_cross,
                                         const Tensor& f_refined,
                                         const DualAttentionParams& p);

// Concatenates both streams and fuses them; returns the enriched
// classification token (the h_cross slot, row 0).
Tensor daff_fuse(const Tensor& h_cross, const Tensor& h_refined,
                 const DaffParams& p);

}  // namespace fgfm
