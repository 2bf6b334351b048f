#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fgfm/rng.hpp"
#include "fgfm/tensor.hpp"

namespace fgfm {

enum class BlockKind { transformer, conformer_lite };

BlockKind block_kind_from_string(const std::string& name);
std::string block_kind_to_string(BlockKind kind);

struct EncoderConfig {
  std::size_t embed_dim = 64;   // D
  std::size_t num_heads = 4;    // K
  std::size_t num_blocks = 4;   // L
  BlockKind block_kind = BlockKind::transformer;
  std::size_t ffn_expansion = 4;
  std::size_t conv_module_kernel = 15;  // conformer_lite only, odd
  double dropout_rate = 0.0;  // carried for config compatibility; never applied

  std::size_t head_dim() const { return embed_dim / num_heads; }
};

// Throws ConfigError on violated invariants (D % K, L >= 1, odd conv kernel...).
void validate(const EncoderConfig& cfg);

// Per-head CLS attention rows, post-softmax, with the CLS-key entry dropped
// and NOT renormalized. cls_self keeps the dropped entry so the sum-to-one
// property stays checkable.
struct AttentionMaps {
  std::vector<std::vector<double>> rows;  // K rows, each length N-1
  std::vector<double> cls_self;           // K dropped self-attention entries
};

struct BlockOutput {
  Tensor sequence;  // [N, D], row 0 = classification token
  AttentionMaps cls_attention;
};

struct LayerNormParams {
  Tensor gamma, beta;
};

struct MhsaParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FfnParams {
  Tensor w1, b1, w2, b2;  // D -> E*D -> D
};

// Conformer-lite convolution module: layer norm, depthwise conv over frame
// positions (CLS row bypasses the branch entirely), GELU, pointwise linear.
struct ConvModuleParams {
  LayerNormParams ln;
  Tensor depthwise;       // [D, conv_module_kernel]
  Tensor depthwise_bias;  // [D]
  Tensor pointwise_w;     // [D, D]
  Tensor pointwise_b;     // [D]
};

struct BlockParams {
  // Transformer uses ln_mhsa/mhsa/ln_ffn/ffn. Conformer-lite adds the first
  // half-FFN, the conv module and a final layer norm.
  LayerNormParams ln_mhsa;
  MhsaParams mhsa;
  LayerNormParams ln_ffn;
  FfnParams ffn;
  LayerNormParams ln_ffn1;  // conformer_lite only
  FfnParams ffn1;           // conformer_lite only
  ConvModuleParams conv;    // conformer_lite only
  LayerNormParams ln_final; // conformer_lite only

  // Stable enumeration for the optimizer and on-disk serialization.
  void collect(BlockKind kind, std::vector<Tensor>& out) const;
};

Tensor init_linear_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng);
LayerNormParams init_layer_norm(std::size_t dim);
BlockParams init_block_params(const EncoderConfig& cfg, Rng& rng);

Tensor prepend_cls(const Tensor& x_seq, const Tensor& cls_param);

// Standard channel-split multi-head self-attention, scale 1/sqrt(D/K).
std::pair<Tensor, AttentionMaps> mhsa(const Tensor& x, const MhsaParams& p,
                                      std::size_t num_heads);

BlockOutput encoder_block(const Tensor& x, const BlockParams& p,
                          const EncoderConfig& cfg);

// Applies `blocks` sequentially, retaining every BlockOutput for voting.
std::vector<BlockOutput> run_stack(const Tensor& x,
                                   const std::vector<BlockParams>& blocks,
                                   const EncoderConfig& cfg);

}  // namespace fgfm
