#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgfm/tensor.hpp"

namespace fgfm {

// Synthetic localized-artifact corpus: harmonic utterances where spoof items
// differ from genuine ones only inside a short frame-aligned window. A
// manifest line carries everything needed to regenerate an utterance
// bit-exactly, so datasets are stored as metadata, not audio.

enum class ArtifactKind { none, splice, phase_jump, transition_blur };

ArtifactKind artifact_kind_from_string(const std::string& name);
std::string artifact_kind_to_string(ArtifactKind kind);

struct SynthSpec {
  std::size_t sample_rate = 16000;
  std::size_t num_frames = 50;          // utterance length in frontend frames
  std::size_t samples_per_frame = 160;  // frontend stride product
  std::size_t num_harmonics = 5;
  ArtifactKind artifact_kind = ArtifactKind::none;
  std::size_t window_start = 0;  // frames
  std::size_t window_len = 0;    // frames
  std::size_t label = 1;         // 1 = bonafide, 0 = spoof
  std::uint64_t seed = 0;
};

struct Utterance {
  std::string utt_id;
  std::size_t label = 1;
  std::vector<double> waveform;
  Tensor features;  // set when running on precomputed features instead
  std::vector<int> artifact_mask;  // one flag per frame
  ArtifactKind artifact_kind = ArtifactKind::none;
  std::size_t window_start = 0;
  std::size_t window_len = 0;
  std::uint64_t seed = 0;
};

Utterance generate_utterance(const SynthSpec& spec, const std::string& utt_id);

struct DataConfig {
  std::size_t num_train = 800;
  std::size_t num_eval = 200;
  std::size_t frames_per_utt = 50;
  std::size_t num_harmonics = 5;
  double spoof_fraction = 0.5;
  std::string artifact_kind = "splice";  // or phase_jump/transition_blur/mix
  double window_min_frac = 0.05;
  double window_max_frac = 0.10;
  std::size_t sample_rate = 16000;
  std::string train_manifest = "train_manifest.txt";
  std::string eval_manifest = "eval_manifest.txt";
  std::string features_dir;  // feature_file frontend: <dir>/<utt_id>.fgft
};

void validate(const DataConfig& cfg);

// Fully generated split (waveforms included); deterministic in split_seed.
std::vector<Utterance> generate_split(const DataConfig& cfg, std::size_t count,
                                      std::uint64_t split_seed,
                                      const std::string& id_prefix);

struct ManifestEntry {
  std::string utt_id;
  std::size_t label = 1;
  ArtifactKind artifact_kind = ArtifactKind::none;
  std::size_t window_start = 0;
  std::size_t window_len = 0;
  std::uint64_t seed = 0;
};

// Line format: "utt_id label artifact_kind window_start window_len seed".
void write_manifest(const std::vector<Utterance>& utts,
                    const std::string& path);
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Regenerates the waveform and mask a manifest line describes.
Utterance realize(const ManifestEntry& entry, const DataConfig& cfg);
std::vector<Utterance> load_dataset(const std::string& manifest_path,
                                    const DataConfig& cfg);

// Binary feature file: "FGFT", u32 version, u32 T, u32 dim, then T*dim
// little-endian float32 values, row-major.
Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& features);

}  // namespace fgfm
