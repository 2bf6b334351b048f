#include "fgfm/clr.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "fgfm/errors.hpp"
#include "fgfm/ops.hpp"

namespace fgfm {

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(matmul(x, w), b);
}

StreamProjections init_stream(std::size_t d, Rng& rng) {
  StreamProjections p;
  p.wq = init_linear_weight(d, d, rng);
  p.bq = Tensor::zeros({d}, true);
  p.wk = init_linear_weight(d, d, rng);
  p.bk = Tensor::zeros({d}, true);
  p.wv = init_linear_weight(d, d, rng);
  p.bv = Tensor::zeros({d}, true);
  return p;
}

}  // namespace

void ClrParams::collect(std::vector<Tensor>& out) const {
  for (const StreamProjections* s : {&attention.cross, &attention.refined}) {
    out.push_back(s->wq);
    out.push_back(s->bq);
    out.push_back(s->wk);
    out.push_back(s->bk);
    out.push_back(s->wv);
    out.push_back(s->bv);
  }
  out.push_back(daff.ln.gamma);
  out.push_back(daff.ln.beta);
  out.push_back(daff.w1);
  out.push_back(daff.b1);
  out.push_back(daff.conv_kernel);
  out.push_back(daff.conv_bias);
  out.push_back(daff.w2);
  out.push_back(daff.b2);
}

DualAttentionParams init_dual_attention(std::size_t embed_dim, Rng& rng) {
  return {init_stream(embed_dim, rng), init_stream(embed_dim, rng)};
}

DaffParams init_daff(std::size_t embed_dim, std::size_t expansion, Rng& rng) {
  const std::size_t e = embed_dim * expansion;
  DaffParams p;
  p.ln = init_layer_norm(embed_dim);
  p.w1 = init_linear_weight(embed_dim, e, rng);
  p.b1 = Tensor::zeros({e}, true);
  const double s = std::sqrt(1.0 / 3.0);
  p.conv_kernel = Tensor(Shape{e, 3}, true);
  for (double& v : p.conv_kernel.values()) v = rng.uniform(-s, s);
  p.conv_bias = Tensor::zeros({e}, true);
  p.w2 = init_linear_weight(e, embed_dim, rng);
  p.b2 = Tensor::zeros({embed_dim}, true);
  return p;
}

ClrParams init_clr_params(const EncoderConfig& cfg, Rng& rng) {
  ClrParams p;
  p.attention = init_dual_attention(cfg.embed_dim, rng);
  p.daff = init_daff(cfg.embed_dim, cfg.ffn_expansion, rng);
  return p;
}

Tensor build_cross_input(const Tensor& cls_last,
                         const std::vector<SelectionResult>& selections) {
  if (cls_last.rank() != 1)
    throw DimensionError("build_cross_input: classification token must be 1-D");
  if (selections.empty())
    throw DimensionError("build_cross_input: no selections");
  const std::size_t d = cls_last.dim(0);
  const std::size_t v = selections.front().indices.size();

  std::vector<Tensor> parts;
  parts.reserve(selections.size() + 1);
  parts.push_back(reshape(cls_last, {1, d}));
  for (const SelectionResult& sel : selections) {
    if (sel.indices.size() != v || sel.representations.dim(0) != v ||
        sel.representations.dim(1) != d)
      throw DimensionError("build_cross_input: inconsistent selection shapes");
    parts.push_back(sel.representations);
  }
  return concat_rows(parts);
}

CrossBlockResult cross_layer_block(const Tensor& x_in, const BlockParams& p,
                                   const EncoderConfig& cfg, std::size_t v,
                                   bool enhancement_enabled) {
  CrossBlockResult result;
  result.block = encoder_block(x_in, p, cfg);
  result.sel = select_frames(result.block, v, cfg.num_blocks + 1,
                             enhancement_enabled);
  Tensor cls_row = gather_rows(result.block.sequence, {0});
  result.f_cross = concat_rows({cls_row, result.sel.representations});
  return result;
}

Tensor refine_block(const Tensor& cls_last, const SelectionResult& sel,
                    const BlockParams& p, const EncoderConfig& cfg) {
  Tensor x_in = concat_rows(
      {reshape(cls_last, {1, cls_last.dim(0)}), sel.representations});
  return encoder_block(x_in, p, cfg).sequence;
}

DualAttentionResult dual_cross_attention(const Tensor& f_cross,
                                         const Tensor& f_refined,
                                         const DualAttentionParams& p) {
  if (f_cross.shape() != f_refined.shape())
    throw DimensionError("dual_cross_attention: stream shapes differ: " +
                         shape_str(f_cross.shape()) + " vs " +
                         shape_str(f_refined.shape()));
  const double s = 1.0 / std::sqrt(static_cast<double>(f_cross.dim(1)));

  Tensor qc = linear(f_cross, p.cross.wq, p.cross.bq);
  Tensor kc = linear(f_cross, p.cross.wk, p.cross.bk);
  Tensor vc = linear(f_cross, p.cross.wv, p.cross.bv);
  Tensor qr = linear(f_refined, p.refined.wq, p.refined.bq);
  Tensor kr = linear(f_refined, p.refined.wk, p.refined.bk);
  Tensor vr = linear(f_refined, p.refined.wv, p.refined.bv);

  DualAttentionResult result;
  result.attn_cross = softmax(scale(matmul(qc, transpose(kr)), s));
  result.h_cross = add(matmul(result.attn_cross, vr), f_cross);
  result.attn_refined = softmax(scale(matmul(qr, transpose(kc)), s));
  result.h_refined = add(matmul(result.attn_refined, vc), f_refined);
  return result;
}

Tensor daff_fuse(const Tensor& h_cross, const Tensor& h_refined,
                 const DaffParams& p) {
  if (h_cross.shape() != h_refined.shape())
    throw DimensionError("daff_fuse: stream shapes differ");
  const std::size_t rows = h_cross.dim(0);  // 1+v
  if (rows < 2) throw DimensionError("daff_fuse: streams need frame rows");
  const std::size_t v = rows - 1;

  Tensor z = concat_rows({h_cross, h_refined});  // [2(1+v), D]
  Tensor expanded = gelu(linear(layer_norm(z, p.ln.gamma, p.ln.beta),
                                p.w1, p.b1));

  // Classification-token rows (0 and 1+v) bypass the convolution; each
  // stream's frame run is convolved on its own so the runs never mix.
  std::vector<std::size_t> cls_a{0}, cls_b{rows};
  std::vector<std::size_t> run_a(v), run_b(v);
  for (std::size_t i = 0; i < v; ++i) {
    run_a[i] = 1 + i;
    run_b[i] = rows + 1 + i;
  }
  Tensor mixed = concat_rows(
      {gather_rows(expanded, cls_a),
       depthwise_conv_same(gather_rows(expanded, run_a), p.conv_kernel,
                           p.conv_bias),
       gather_rows(expanded, cls_b),
       depthwise_conv_same(gather_rows(expanded, run_b), p.conv_kernel,
                           p.conv_bias)});

  Tensor fused = add(z, linear(mixed, p.w2, p.b2));
  return reshape(gather_rows(fused, {0}), {h_cross.dim(1)});
}

}  // namespace fgfm
