#include "fgfm/encoder.hpp"

#include <cmath>
#include <utility>

#include "fgfm/errors.hpp"
#include "fgfm/ops.hpp"

namespace fgfm {

BlockKind block_kind_from_string(const std::string& name) {
  if (name == "transformer") return BlockKind::transformer;
  if (name == "conformer_lite") return BlockKind::conformer_lite;
  throw ConfigError("unknown block_kind '" + name +
                    "' (expected transformer or conformer_lite)");
}

std::string block_kind_to_string(BlockKind kind) {
  return kind == BlockKind::transformer ? "transformer" : "conformer_lite";
}

void validate(const EncoderConfig& cfg) {
  if (cfg.embed_dim == 0 || cfg.num_heads == 0)
    throw ConfigError("embed_dim and num_heads must be positive");
  if (cfg.embed_dim % cfg.num_heads != 0)
    throw ConfigError("embed_dim " + std::to_string(cfg.embed_dim) +
                      " not divisible by num_heads " +
                      std::to_string(cfg.num_heads));
  if (cfg.num_blocks < 1) throw ConfigError("num_blocks must be >= 1");
  if (cfg.ffn_expansion < 1) throw ConfigError("ffn_expansion must be >= 1");
  if (cfg.conv_module_kernel % 2 == 0)
    throw ConfigError("conv_module_kernel must be odd");
  if (cfg.dropout_rate < 0.0 || cfg.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must lie in [0, 1)");
}

Tensor init_linear_weight(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double s = std::sqrt(1.0 / static_cast<double>(fan_in));
  Tensor w(Shape{fan_in, fan_out}, true);
  for (double& v : w.values()) v = rng.uniform(-s, s);
  return w;
}

LayerNormParams init_layer_norm(std::size_t dim) {
  return {Tensor::full({dim}, 1.0, true), Tensor::zeros({dim}, true)};
}

namespace {

Tensor zero_bias(std::size_t dim) { return Tensor::zeros({dim}, true); }

MhsaParams init_mhsa(std::size_t d, Rng& rng) {
  MhsaParams p;
  p.wq = init_linear_weight(d, d, rng);
  p.bq = zero_bias(d);
  p.wk = init_linear_weight(d, d, rng);
  p.bk = zero_bias(d);
  p.wv = init_linear_weight(d, d, rng);
  p.bv = zero_bias(d);
  p.wo = init_linear_weight(d, d, rng);
  p.bo = zero_bias(d);
  return p;
}

FfnParams init_ffn(std::size_t d, std::size_t expansion, Rng& rng) {
  FfnParams p;
  p.w1 = init_linear_weight(d, d * expansion, rng);
  p.b1 = zero_bias(d * expansion);
  p.w2 = init_linear_weight(d * expansion, d, rng);
  p.b2 = zero_bias(d);
  return p;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(matmul(x, w), b);
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p) {
  return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

// Frame rows get the depthwise conv path; the CLS row contributes zero to the
// branch, so with the residual it passes through untouched.
Tensor conv_module_forward(const Tensor& x, const ConvModuleParams& p) {
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  Tensor y = layer_norm(x, p.ln.gamma, p.ln.beta);
  std::vector<std::size_t> frame_rows(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) frame_rows[i] = i + 1;
  Tensor frames = gather_rows(y, frame_rows);
  Tensor conved = depthwise_conv_same(frames, p.depthwise, p.depthwise_bias);
  Tensor proj = linear(gelu(conved), p.pointwise_w, p.pointwise_b);
  return concat_rows({Tensor::zeros({1, d}), proj});
}

}  // namespace

void BlockParams::collect(BlockKind kind, std::vector<Tensor>& out) const {
  auto push_ln = [&out](const LayerNormParams& p) {
    out.push_back(p.gamma);
    out.push_back(p.beta);
  };
  auto push_ffn = [&out](const FfnParams& p) {
    out.push_back(p.w1);
    out.push_back(p.b1);
    out.push_back(p.w2);
    out.push_back(p.b2);
  };
  if (kind == BlockKind::conformer_lite) {
    push_ln(ln_ffn1);
    push_ffn(ffn1);
  }
  push_ln(ln_mhsa);
  out.push_back(mhsa.wq);
  out.push_back(mhsa.bq);
  out.push_back(mhsa.wk);
  out.push_back(mhsa.bk);
  out.push_back(mhsa.wv);
  out.push_back(mhsa.bv);
  out.push_back(mhsa.wo);
  out.push_back(mhsa.bo);
  if (kind == BlockKind::conformer_lite) {
    push_ln(conv.ln);
    out.push_back(conv.depthwise);
    out.push_back(conv.depthwise_bias);
    out.push_back(conv.pointwise_w);
    out.push_back(conv.pointwise_b);
  }
  push_ln(ln_ffn);
  push_ffn(ffn);
  if (kind == BlockKind::conformer_lite) push_ln(ln_final);
}

BlockParams init_block_params(const EncoderConfig& cfg, Rng& rng) {
  const std::size_t d = cfg.embed_dim;
  BlockParams p;
  if (cfg.block_kind == BlockKind::conformer_lite) {
    p.ln_ffn1 = init_layer_norm(d);
    p.ffn1 = init_ffn(d, cfg.ffn_expansion, rng);
  }
  p.ln_mhsa = init_layer_norm(d);
  p.mhsa = init_mhsa(d, rng);
  if (cfg.block_kind == BlockKind::conformer_lite) {
    p.conv.ln = init_layer_norm(d);
    const double s = std::sqrt(1.0 / static_cast<double>(cfg.conv_module_kernel));
    p.conv.depthwise = Tensor(Shape{d, cfg.conv_module_kernel}, true);
    for (double& v : p.conv.depthwise.values()) v = rng.uniform(-s, s);
    p.conv.depthwise_bias = zero_bias(d);
    p.conv.pointwise_w = init_linear_weight(d, d, rng);
    p.conv.pointwise_b = zero_bias(d);
  }
  p.ln_ffn = init_layer_norm(d);
  p.ffn = init_ffn(d, cfg.ffn_expansion, rng);
  if (cfg.block_kind == BlockKind::conformer_lite)
    p.ln_final = init_layer_norm(d);
  return p;
}

Tensor prepend_cls(const Tensor& x_seq, const Tensor& cls_param) {
  if (x_seq.rank() != 2 || cls_param.rank() != 1 ||
      x_seq.dim(1) != cls_param.dim(0))
    throw DimensionError("prepend_cls: frame sequence [T,D] and token [D] "
                         "disagree: " + shape_str(x_seq.shape()) + " vs " +
                         shape_str(cls_param.shape()));
  return concat_rows({reshape(cls_param, {1, cls_param.dim(0)}), x_seq});
}

std::pair<Tensor, AttentionMaps> mhsa(const Tensor& x, const MhsaParams& p,
                                      std::size_t num_heads) {
  const std::size_t n = x.dim(0);
  const std::size_t d = x.dim(1);
  if (n < 2) throw DimensionError("mhsa needs CLS plus at least one frame");
  const std::size_t dh = d / num_heads;

  Tensor q = linear(x, p.wq, p.bq);
  Tensor k = linear(x, p.wk, p.bk);
  Tensor v = linear(x, p.wv, p.bv);

  AttentionMaps maps;
  std::vector<Tensor> head_outputs;
  head_outputs.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    Tensor qh = slice_cols(q, h * dh, dh);
    Tensor kh = slice_cols(k, h * dh, dh);
    Tensor vh = slice_cols(v, h * dh, dh);
    Tensor scores =
        scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor attn = softmax(scores);
    head_outputs.push_back(matmul(attn, vh));

    std::vector<double> cls_row(n - 1);
    for (std::size_t j = 1; j < n; ++j) cls_row[j - 1] = attn.at(0, j);
    maps.rows.push_back(std::move(cls_row));
    maps.cls_self.push_back(attn.at(0, 0));
  }
  Tensor out = linear(concat_cols(head_outputs), p.wo, p.bo);
  return {out, std::move(maps)};
}

BlockOutput encoder_block(const Tensor& x, const BlockParams& p,
                          const EncoderConfig& cfg) {
  if (x.rank() != 2 || x.dim(1) != cfg.embed_dim)
    throw DimensionError("encoder_block: expected [N," +
                         std::to_string(cfg.embed_dim) + "], got " +
                         shape_str(x.shape()));
  BlockOutput result;
  if (cfg.block_kind == BlockKind::transformer) {
    auto [attn_out, maps] =
        mhsa(layer_norm(x, p.ln_mhsa.gamma, p.ln_mhsa.beta), p.mhsa,
             cfg.num_heads);
    Tensor h = add(x, attn_out);
    Tensor f = ffn_forward(layer_norm(h, p.ln_ffn.gamma, p.ln_ffn.beta), p.ffn);
    result.sequence = add(h, f);
    result.cls_attention = std::move(maps);
  } else {
    Tensor h1 = add(
        x, scale(ffn_forward(layer_norm(x, p.ln_ffn1.gamma, p.ln_ffn1.beta),
                             p.ffn1),
                 0.5));
    auto [attn_out, maps] =
        mhsa(layer_norm(h1, p.ln_mhsa.gamma, p.ln_mhsa.beta), p.mhsa,
             cfg.num_heads);
    Tensor h2 = add(h1, attn_out);
    Tensor h3 = add(h2, conv_module_forward(h2, p.conv));
    Tensor h4 = add(
        h3, scale(ffn_forward(layer_norm(h3, p.ln_ffn.gamma, p.ln_ffn.beta),
                              p.ffn),
                  0.5));
    result.sequence = layer_norm(h4, p.ln_final.gamma, p.ln_final.beta);
    result.cls_attention = std::move(maps);
  }
  return result;
}

std::vector<BlockOutput> run_stack(const Tensor& x,
                                   const std::vector<BlockParams>& blocks,
                                   const EncoderConfig& cfg) {
  std::vector<BlockOutput> outputs;
  outputs.reserve(blocks.size());
  Tensor current = x;
  for (const BlockParams& p : blocks) {
    outputs.push_back(encoder_block(current, p, cfg));
    current = outputs.back().sequence;
  }
  return outputs;
}

}  // namespace fgfm
