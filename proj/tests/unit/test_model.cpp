#include "doctest.h"

#include <cmath>
#include <vector>

#include "support/finite_diff.hpp"
#include "support/test_util.hpp"

#include "fgfm/errors.hpp"
#include "fgfm/model.hpp"
#include "fgfm/ops.hpp"

using namespace fgfm;
using testsupport::max_grad_error;
using testsupport::random_tensor;

namespace {

ModelConfig tiny_cfg(std::size_t frames = 8) {
  ModelConfig cfg;
  cfg.encoder.embed_dim = 8;
  cfg.encoder.num_heads = 2;
  cfg.encoder.num_blocks = 2;
  cfg.encoder.ffn_expansion = 2;
  cfg.votes = 2;
  cfg.conv1_channels = 4;
  cfg.conv2_channels = 4;
  cfg.seed = 3;
  (void)frames;
  return cfg;
}

// Tone plus small noise; amplitude carries the class so the task is learnable
// within a few dozen steps.
Utterance make_utt(int label, std::uint64_t seed, std::size_t frames = 8) {
  Utterance u;
  u.utt_id = "u" + std::to_string(seed);
  u.label = label;
  u.seed = seed;
  Rng rng(seed);
  const double freq = rng.uniform(150.0, 260.0);
  const double amp = label == 1 ? 0.45 : 0.08;
  const std::size_t samples = frames * 160;
  u.waveform.resize(samples);
  for (std::size_t i = 0; i < samples; ++i)
    u.waveform[i] =
        amp * std::sin(6.283185307179586 * freq * static_cast<double>(i) /
                       16000.0) +
        0.01 * rng.normal();
  return u;
}

}  // namespace

TEST_CASE("model validation rejects bad configs") {
  ModelConfig cfg = tiny_cfg();
  CHECK_NOTHROW(validate(cfg));

  cfg.votes = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = tiny_cfg();
  cfg.frontend = FrontendKind::feature_file;
  cfg.feature_dim = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);

  cfg = tiny_cfg();
  cfg.conv1_stride = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("frontend produces one frame per full stride window") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);

  for (std::size_t samples : {3200ul, 3359ul, 160ul}) {
    std::vector<double> wave(samples, 0.1);
    const Tensor frames = toy_frontend(wave, cfg, params);
    CHECK(frames.dim(0) == samples / cfg.stride_product());
    CHECK(frames.dim(1) == cfg.encoder.embed_dim);
  }

  std::vector<double> short_wave(cfg.stride_product() - 1, 0.1);
  CHECK_THROWS_AS(toy_frontend(short_wave, cfg, params), DataError);
}

TEST_CASE("baseline forward classifies on the token without any selection") {
  ModelConfig cfg = tiny_cfg();
  cfg.use_fgfm = false;
  const ModelParameters params = init_model(cfg);
  const Utterance utt = make_utt(1, 42);

  const ForwardResult out = forward(embed(utt, cfg, params), cfg, params);
  CHECK(out.logits.size() == 2);
  CHECK(out.diag.selections.empty());
  CHECK_FALSE(out.diag.has_cross);
  CHECK(out.diag.attention.size() == cfg.encoder.num_blocks);
}

TEST_CASE("full forward reports one selection per block plus the pooled one") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  const Utterance utt = make_utt(0, 43);
  const std::size_t t = utt.waveform.size() / cfg.stride_product();

  const ForwardResult out = forward(embed(utt, cfg, params), cfg, params);
  CHECK(out.logits.size() == 2);
  REQUIRE(out.diag.selections.size() == cfg.encoder.num_blocks);
  for (std::size_t b = 0; b < cfg.encoder.num_blocks; ++b) {
    const SelectionResult& sel = out.diag.selections[b];
    CHECK(sel.source_block == b + 1);
    REQUIRE(sel.indices.size() == cfg.votes);
    CHECK(std::is_sorted(sel.indices.begin(), sel.indices.end()));
    CHECK(sel.indices.back() < t);
  }
  CHECK(out.diag.has_cross);
  // the pooled stage votes over L*v candidate rows
  CHECK(out.diag.cross_selection.indices.size() == cfg.votes);
  CHECK(out.diag.cross_selection.indices.back() <
        cfg.encoder.num_blocks * cfg.votes);
  CHECK(out.diag.attention.size() == cfg.encoder.num_blocks + 1);
}

TEST_CASE("single-head single-block with every frame kept still runs") {
  ModelConfig cfg = tiny_cfg();
  cfg.encoder.num_heads = 1;
  cfg.encoder.num_blocks = 1;
  cfg.votes = 8;  // == T for an 8-frame utterance
  const ModelParameters params = init_model(cfg);
  const Utterance utt = make_utt(1, 44);

  const ForwardResult out = forward(embed(utt, cfg, params), cfg, params);
  CHECK(std::isfinite(out.logits.at(0)));
  CHECK(std::isfinite(out.logits.at(1)));
  CHECK(out.diag.selections[0].indices.size() == 8);
}

TEST_CASE("the detection score is the logit margin") {
  Tensor logits(Shape{2}, {0.25, 1.0});
  CHECK(detection_score(logits) == 0.75);
  Tensor bad(Shape{3});
  CHECK_THROWS_AS(detection_score(bad), DimensionError);
}

TEST_CASE("whole-model gradients match finite differences") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  const Utterance utt = make_utt(1, 45);

  auto forward_loss = [&]() {
    const ForwardResult out = forward(embed(utt, cfg, params), cfg, params);
    return cross_entropy_with_logits(out.logits, utt.label);
  };
  const double err = max_grad_error(
      forward_loss,
      {params.conv1_w, params.proj_w, params.cls, params.blocks[0].mhsa.wq,
       params.blocks[3].ffn.w1, params.clr.attention.cross.wq,
       params.clr.daff.w2, params.head_w});
  CHECK(err < 1e-4);
}

TEST_CASE("a zero-rate optimizer is inert; the first real step is a nudge") {
  Tensor p(Shape{3}, {1.0, 2.0, 3.0}, true);
  p.zero_grad();
  p.grad()[0] = 0.5;
  p.grad()[1] = -2.0;

  Adam frozen({p}, {0.0, 0.9, 0.999, 1e-8});
  frozen.step();
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == 2.0);
  CHECK(p.at(2) == 3.0);

  Adam opt({p}, {0.1, 0.9, 0.999, 1e-8});
  opt.step();
  // bias-corrected first step moves by lr * g/|g| wherever the gradient
  // dominates the stabilizer
  CHECK(p.at(0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.at(1) == doctest::Approx(2.1).epsilon(1e-6));
  CHECK(p.at(2) == 3.0);
}

TEST_CASE("duplicating a sample leaves the mean loss unchanged") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  Adam frozen(params.all(cfg), {0.0, 0.9, 0.999, 1e-8});
  const Utterance utt = make_utt(0, 46);

  const double single = train_step({&utt}, cfg, params, frozen);
  const double doubled = train_step({&utt, &utt}, cfg, params, frozen);
  CHECK(single == doubled);
  CHECK_THROWS_AS(train_step({}, cfg, params, frozen), TrainingError);
}

TEST_CASE("training drives the loss down on a separable toy set") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  AdamConfig opt_cfg;
  opt_cfg.lr = 3e-3;
  Adam opt(params.all(cfg), opt_cfg);

  std::vector<Utterance> utts;
  for (std::uint64_t s = 0; s < 6; ++s)
    utts.push_back(make_utt(s % 2 == 0 ? 1 : 0, 100 + s));
  std::vector<const Utterance*> batch;
  for (const Utterance& u : utts) batch.push_back(&u);

  double first = 0.0, last = 0.0;
  for (int step = 0; step < 40; ++step) {
    const double loss = train_step(batch, cfg, params, opt);
    if (step == 0) first = loss;
    last = loss;
  }
  CHECK(last < first);
  CHECK(last < 0.5 * first);
}

TEST_CASE("checkpoint-precision rounding is float-faithful and idempotent") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  quantize_to_checkpoint_precision(params, cfg);

  std::vector<double> snapshot;
  for (const Tensor& t : params.all(cfg))
    for (double v : t.values()) {
      CHECK(v == static_cast<double>(static_cast<float>(v)));
      snapshot.push_back(v);
    }

  quantize_to_checkpoint_precision(params, cfg);
  std::size_t i = 0;
  for (const Tensor& t : params.all(cfg))
    for (double v : t.values()) CHECK(v == snapshot[i++]);
}

TEST_CASE("scoring a set yields one finite record per utterance in order") {
  const ModelConfig cfg = tiny_cfg();
  const ModelParameters params = init_model(cfg);
  std::vector<Utterance> utts;
  for (std::uint64_t s = 0; s < 4; ++s)
    utts.push_back(make_utt(s % 2 == 0 ? 1 : 0, 200 + s));

  const std::vector<ScoreRecord> records = score_dataset(utts, cfg, params);
  REQUIRE(records.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(records[i].utt_id == utts[i].utt_id);
    CHECK(records[i].label == utts[i].label);
    CHECK(std::isfinite(records[i].score));
  }
}

TEST_CASE("feature frontend projects stored features and rejects absence") {
  ModelConfig cfg = tiny_cfg();
  cfg.frontend = FrontendKind::feature_file;
  cfg.feature_dim = 5;
  const ModelParameters params = init_model(cfg);

  Utterance utt = make_utt(1, 47);
  CHECK_THROWS_AS(embed(utt, cfg, params), DataError);

  Rng rng(48);
  utt.features = random_tensor({6, 5}, rng);
  const Tensor frames = embed(utt, cfg, params);
  CHECK(frames.dim(0) == 6);
  CHECK(frames.dim(1) == cfg.encoder.embed_dim);

  Tensor wrong = random_tensor({6, 4}, rng);
  CHECK_THROWS_AS(project_features(wrong, cfg, params), DimensionError);
}
