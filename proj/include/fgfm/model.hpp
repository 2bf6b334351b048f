#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgfm/clr.hpp"
#include "fgfm/data.hpp"
#include "fgfm/encoder.hpp"
#include "fgfm/eval.hpp"
#include "fgfm/mhv.hpp"
#include "fgfm/tensor.hpp"

namespace fgfm {

enum class FrontendKind { toy_conv, feature_file };

FrontendKind frontend_kind_from_string(const std::string& name);
std::string frontend_kind_to_string(FrontendKind kind);

struct ModelConfig {
  EncoderConfig encoder;
  std::size_t votes = 24;  // v: frames flagged per head and kept per block
  FrontendKind frontend = FrontendKind::toy_conv;
  std::size_t feature_dim = 0;  // feature_file frontend only
  bool use_fgfm = true;
  bool no_daff = false;         // classify on the cross feature directly
  bool no_enhancement = false;  // vote top-k without kernel smoothing
  std::uint64_t seed = 1;

  // Toy frontend geometry: two strided conv layers with kernel width equal
  // to stride, so T = floor(samples / (conv1_stride * conv2_stride)).
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t conv1_stride = 10;
  std::size_t conv2_stride = 16;

  std::size_t stride_product() const { return conv1_stride * conv2_stride; }
};

void validate(const ModelConfig& cfg);

// Every tensor of the classifier. Two extra encoder blocks beyond the main
// stack are always allocated; the no-FGFM baseline simply never runs them.
struct ModelParameters {
  Tensor conv1_w, conv1_b;  // toy_conv frontend
  Tensor conv2_w, conv2_b;
  Tensor proj_w, proj_b;  // frontend channels (or feature_dim) -> D
  Tensor cls;             // [D] learnable classification token
  std::vector<BlockParams> blocks;  // length L+2
  ClrParams clr;
  Tensor head_w, head_b;  // [D,2], [2]

  // Stable enumeration used by the optimizer and the checkpoint layout.
  std::vector<Tensor> all(const ModelConfig& cfg) const;
};

ModelParameters init_model(const ModelConfig& cfg);

// Waveform -> [T, D]: two strided convolutions (GELU between) and a linear
// projection. Throws DataError when the waveform is shorter than one window.
Tensor toy_frontend(const std::vector<double>& waveform,
                    const ModelConfig& cfg, const ModelParameters& params);

// Precomputed-feature path: [T, feature_dim] -> [T, D].
Tensor project_features(const Tensor& features, const ModelConfig& cfg,
                        const ModelParameters& params);

// Dispatches on the configured frontend.
Tensor embed(const Utterance& utt, const ModelConfig& cfg,
             const ModelParameters& params);

struct Diagnostics {
  std::vector<AttentionMaps> attention;     // per executed block
  std::vector<SelectionResult> selections;  // main-stack selections
  bool has_cross = false;
  SelectionResult cross_selection;  // second-stage selection
};

struct ForwardResult {
  Tensor logits;  // [2]: index 0 spoof, index 1 bonafide
  Diagnostics diag;
};

ForwardResult forward(const Tensor& frames, const ModelConfig& cfg,
                      const ModelParameters& params);

// Higher means more bonafide.
double detection_score(const Tensor& logits);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);
  void zero_grad();
  void step();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  AdamConfig cfg_;
};

// One optimizer step on the mean cross-entropy over the batch; returns the
// loss. Throws TrainingError when the loss goes non-finite.
double train_step(const std::vector<const Utterance*>& batch,
                  const ModelConfig& cfg, const ModelParameters& params,
                  Adam& opt);

// Rounds every parameter through float32, the checkpoint precision, so
// metrics computed now match metrics computed after a save/load cycle.
void quantize_to_checkpoint_precision(const ModelParameters& params,
                                      const ModelConfig& cfg);

// Inference over a dataset (no tape): one ScoreRecord per utterance.
std::vector<ScoreRecord> score_dataset(const std::vector<Utterance>& utts,
                                       const ModelConfig& cfg,
                                       const ModelParameters& params);

}  // namespace fgfm
