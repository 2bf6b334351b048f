#include "fgfm/model.hpp"

#include <cmath>
#include <utility>

#include "fgfm/errors.hpp"
#include "fgfm/ops.hpp"

namespace fgfm {

namespace {

constexpr std::uint64_t kStreamParams = 0x10;

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_rowvec(matmul(x, w), b);
}

}  // namespace

FrontendKind frontend_kind_from_string(const std::string& name) {
  if (name == "toy_conv") return FrontendKind::toy_conv;
  if (name == "feature_file") return FrontendKind::feature_file;
  throw ConfigError("unknown frontend '" + name +
                    "' (expected toy_conv or feature_file)");
}

std::string frontend_kind_to_string(FrontendKind kind) {
  return kind == FrontendKind::toy_conv ? "toy_conv" : "feature_file";
}

void validate(const ModelConfig& cfg) {
  validate(cfg.encoder);
  if (cfg.votes < 1) throw ConfigError("votes must be >= 1");
  if (cfg.frontend == FrontendKind::feature_file && cfg.feature_dim == 0)
    throw ConfigError("feature_file frontend needs feature_dim > 0");
  if (cfg.frontend == FrontendKind::toy_conv) {
    if (cfg.conv1_channels == 0 || cfg.conv2_channels == 0 ||
        cfg.conv1_stride == 0 || cfg.conv2_stride == 0)
      throw ConfigError("toy frontend geometry must be positive");
  }
}

std::vector<Tensor> ModelParameters::all(const ModelConfig& cfg) const {
  std::vector<Tensor> out;
  if (cfg.frontend == FrontendKind::toy_conv) {
    out.push_back(conv1_w);
    out.push_back(conv1_b);
    out.push_back(conv2_w);
    out.push_back(conv2_b);
  }
  out.push_back(proj_w);
  out.push_back(proj_b);
  out.push_back(cls);
  for (const BlockParams& b : blocks) b.collect(cfg.encoder.block_kind, out);
  clr.collect(out);
  out.push_back(head_w);
  out.push_back(head_b);
  return out;
}

ModelParameters init_model(const ModelConfig& cfg) {
  validate(cfg);
  Rng rng(derive_seed(cfg.seed, kStreamParams));
  const std::size_t d = cfg.encoder.embed_dim;

  ModelParameters p;
  if (cfg.frontend == FrontendKind::toy_conv) {
    const double s1 = std::sqrt(1.0 / static_cast<double>(cfg.conv1_stride));
    p.conv1_w = Tensor(Shape{cfg.conv1_channels, 1, cfg.conv1_stride}, true);
    for (double& v : p.conv1_w.values()) v = rng.uniform(-s1, s1);
    p.conv1_b = Tensor::zeros({cfg.conv1_channels}, true);
    const double s2 = std::sqrt(
        1.0 / static_cast<double>(cfg.conv1_channels * cfg.conv2_stride));
    p.conv2_w = Tensor(
        Shape{cfg.conv2_channels, cfg.conv1_channels, cfg.conv2_stride}, true);
    for (double& v : p.conv2_w.values()) v = rng.uniform(-s2, s2);
    p.conv2_b = Tensor::zeros({cfg.conv2_channels}, true);
    p.proj_w = init_linear_weight(cfg.conv2_channels, d, rng);
  } else {
    p.proj_w = init_linear_weight(cfg.feature_dim, d, rng);
  }
  p.proj_b = Tensor::zeros({d}, true);

  p.cls = Tensor(Shape{d}, true);
  const double sc = std::sqrt(1.0 / static_cast<double>(d));
  for (double& v : p.cls.values()) v = rng.uniform(-sc, sc);

  const std::size_t total_blocks = cfg.encoder.num_blocks + 2;
  p.blocks.reserve(total_blocks);
  for (std::size_t i = 0; i < total_blocks; ++i)
    p.blocks.push_back(init_block_params(cfg.encoder, rng));

  p.clr = init_clr_params(cfg.encoder, rng);

  p.head_w = init_linear_weight(d, 2, rng);
  p.head_b = Tensor::zeros({2}, true);
  return p;
}

Tensor toy_frontend(const std::vector<double>& waveform,
                    const ModelConfig& cfg, const ModelParameters& params) {
  if (waveform.size() < cfg.stride_product())
    throw DataError("waveform of " + std::to_string(waveform.size()) +
                    " samples is shorter than one frontend window of " +
                    std::to_string(cfg.stride_product()));
  Tensor x(Shape{waveform.size(), 1}, waveform);
  Tensor h1 = gelu(conv1d_strided(x, params.conv1_w, params.conv1_b,
                                  cfg.conv1_stride));
  Tensor h2 = gelu(conv1d_strided(h1, params.conv2_w, params.conv2_b,
                                  cfg.conv2_stride));
  return linear(h2, params.proj_w, params.proj_b);
}

Tensor project_features(const Tensor& features, const ModelConfig& cfg,
                        const ModelParameters& params) {
  if (features.rank() != 2 || features.dim(1) != cfg.feature_dim)
    throw DimensionError("project_features: expected [T," +
                         std::to_string(cfg.feature_dim) + "], got " +
                         shape_str(features.shape()));
  return linear(features, params.proj_w, params.proj_b);
}

Tensor embed(const Utterance& utt, const ModelConfig& cfg,
             const ModelParameters& params) {
  if (cfg.frontend == FrontendKind::toy_conv)
    return toy_frontend(utt.waveform, cfg, params);
  if (!utt.features.defined())
    throw DataError("utterance " + utt.utt_id +
                    " carries no features for the feature_file frontend");
  return project_features(utt.features, cfg, params);
}

ForwardResult forward(const Tensor& frames, const ModelConfig& cfg,
                      const ModelParameters& params) {
  const std::size_t l = cfg.encoder.num_blocks;
  Tensor x = prepend_cls(frames, params.cls);

  std::vector<BlockParams> main_blocks(params.blocks.begin(),
                                       params.blocks.begin() +
                                           static_cast<std::ptrdiff_t>(l));
  std::vector<BlockOutput> outputs = run_stack(x, main_blocks, cfg.encoder);

  ForwardResult result;
  for (const BlockOutput& out : outputs)
    result.diag.attention.push_back(out.cls_attention);

  Tensor token;
  if (!cfg.use_fgfm) {
    token = reshape(gather_rows(outputs.back().sequence, {0}),
                    {cfg.encoder.embed_dim});
  } else {
    const bool enhance_on = !cfg.no_enhancement;
    std::vector<SelectionResult> selections;
    selections.reserve(l);
    for (std::size_t b = 0; b < l; ++b)
      selections.push_back(
          select_frames(outputs[b], cfg.votes, b + 1, enhance_on));
    result.diag.selections = selections;

    Tensor cls_last = reshape(gather_rows(outputs.back().sequence, {0}),
                              {cfg.encoder.embed_dim});
    Tensor x_in = build_cross_input(cls_last, selections);
    CrossBlockResult cross = cross_layer_block(x_in, params.blocks[l],
                                               cfg.encoder, cfg.votes,
                                               enhance_on);
    result.diag.attention.push_back(cross.block.cls_attention);
    result.diag.has_cross = true;
    result.diag.cross_selection = cross.sel;

    if (cfg.no_daff) {
      token = reshape(gather_rows(cross.f_cross, {0}), {cfg.encoder.embed_dim});
    } else {
      Tensor f_refined = refine_block(cls_last, cross.sel,
                                      params.blocks[l + 1], cfg.encoder);
      DualAttentionResult dual =
          dual_cross_attention(cross.f_cross, f_refined, params.clr.attention);
      token = daff_fuse(dual.h_cross, dual.h_refined, params.clr.daff);
    }
  }

  Tensor logits = linear(reshape(token, {1, cfg.encoder.embed_dim}),
                         params.head_w, params.head_b);
  result.logits = reshape(logits, {2});
  return result;
}

double detection_score(const Tensor& logits) {
  if (logits.size() != 2)
    throw DimensionError("detection_score: expected 2 logits, got " +
                         shape_str(logits.shape()));
  return logits.at(1) - logits.at(0);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    const std::vector<double>& g = p.grad();
    for (std::size_t j = 0; j < g.size(); ++j) {
      m_[i][j] = cfg_.beta1 * m_[i][j] + (1.0 - cfg_.beta1) * g[j];
      v_[i][j] = cfg_.beta2 * v_[i][j] + (1.0 - cfg_.beta2) * g[j] * g[j];
      const double m_hat = m_[i][j] / bc1;
      const double v_hat = v_[i][j] / bc2;
      p.at(j) -= cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
}

double train_step(const std::vector<const Utterance*>& batch,
                  const ModelConfig& cfg, const ModelParameters& params,
                  Adam& opt) {
  if (batch.empty()) throw TrainingError("empty batch");
  Tape tape;
  double loss_value;
  {
    TapeScope scope(tape);
    Tensor total = Tensor::scalar(0.0);
    for (const Utterance* utt : batch) {
      Tensor frames = embed(*utt, cfg, params);
      ForwardResult out = forward(frames, cfg, params);
      total = add(total, cross_entropy_with_logits(out.logits, utt->label));
    }
    Tensor loss = scale(total, 1.0 / static_cast<double>(batch.size()));
    loss_value = loss.item();
    if (!std::isfinite(loss_value))
      throw TrainingError("non-finite loss " + std::to_string(loss_value) +
                          " on a batch of " + std::to_string(batch.size()) +
                          " (first utterance " + batch.front()->utt_id + ")");
    opt.zero_grad();
    tape.backward(loss);
  }
  opt.step();
  return loss_value;
}

void quantize_to_checkpoint_precision(const ModelParameters& params,
                                      const ModelConfig& cfg) {
  for (Tensor t : params.all(cfg))
    for (double& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

std::vector<ScoreRecord> score_dataset(const std::vector<Utterance>& utts,
                                       const ModelConfig& cfg,
                                       const ModelParameters& params) {
  std::vector<ScoreRecord> records;
  records.reserve(utts.size());
  for (const Utterance& utt : utts) {
    Tensor frames = embed(utt, cfg, params);
    ForwardResult out = forward(frames, cfg, params);
    records.push_back({utt.utt_id, utt.label, detection_score(out.logits)});
  }
  return records;
}

}  // namespace fgfm
