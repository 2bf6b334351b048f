#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fgfm/data.hpp"
#include "fgfm/model.hpp"

namespace fgfm {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double lr = 1e-4;
  double eer_stop = 0.0;  // stop once dev EER <= this; 0 disables
};

struct AblateConfig {
  std::vector<std::size_t> votes;     // empty -> just the configured v
  std::vector<std::string> variants = {"full", "no_enhancement", "no_daff"};
};

struct VizConfig {
  std::size_t max_utts = 8;
};

struct FullConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  AblateConfig ablate;
  VizConfig viz;
};

// Plain-text "section.key = value" lines; '#' starts a comment. Unknown keys
// and malformed values raise ConfigError.
FullConfig load_config_file(const std::string& path);

// Sets one dotted key on an already-built config. Same key set as the file.
void set_config_key(FullConfig& cfg, const std::string& key,
                    const std::string& value);

// CLI "--set key=value" form; invalid keys/values become UsageError.
void apply_override(FullConfig& cfg, const std::string& assignment);

}  // namespace fgfm
