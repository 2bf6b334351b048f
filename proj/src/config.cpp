#include "fgfm/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value +
                      "'");
  }
  if (pos != value.size())
    throw ConfigError(key + ": trailing junk in '" + value + "'");
  return static_cast<std::size_t>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  return static_cast<std::uint64_t>(parse_size(key, value));
}

double parse_double(const std::string& key, const std::string& value) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  if (pos != value.size())
    throw ConfigError(key + ": trailing junk in '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

}  // namespace

void set_config_key(FullConfig& cfg, const std::string& key,
                    const std::string& value) {
  // encoder.*
  if (key == "encoder.embed_dim") {
    cfg.model.encoder.embed_dim = parse_size(key, value);
  } else if (key == "encoder.num_heads") {
    cfg.model.encoder.num_heads = parse_size(key, value);
  } else if (key == "encoder.num_blocks") {
    cfg.model.encoder.num_blocks = parse_size(key, value);
  } else if (key == "encoder.block_kind") {
    cfg.model.encoder.block_kind = block_kind_from_string(value);
  } else if (key == "encoder.ffn_expansion") {
    cfg.model.encoder.ffn_expansion = parse_size(key, value);
  } else if (key == "encoder.conv_module_kernel") {
    cfg.model.encoder.conv_module_kernel = parse_size(key, value);
  } else if (key == "encoder.dropout_rate") {
    cfg.model.encoder.dropout_rate = parse_double(key, value);
    // model.*
  } else if (key == "model.votes") {
    cfg.model.votes = parse_size(key, value);
  } else if (key == "model.frontend") {
    cfg.model.frontend = frontend_kind_from_string(value);
  } else if (key == "model.feature_dim") {
    cfg.model.feature_dim = parse_size(key, value);
  } else if (key == "model.use_fgfm") {
    cfg.model.use_fgfm = parse_bool(key, value);
  } else if (key == "model.no_daff") {
    cfg.model.no_daff = parse_bool(key, value);
  } else if (key == "model.no_enhancement") {
    cfg.model.no_enhancement = parse_bool(key, value);
  } else if (key == "model.seed") {
    cfg.model.seed = parse_u64(key, value);
  } else if (key == "model.conv1_channels") {
    cfg.model.conv1_channels = parse_size(key, value);
  } else if (key == "model.conv2_channels") {
    cfg.model.conv2_channels = parse_size(key, value);
  } else if (key == "model.conv1_stride") {
    cfg.model.conv1_stride = parse_size(key, value);
  } else if (key == "model.conv2_stride") {
    cfg.model.conv2_stride = parse_size(key, value);
    // train.*
  } else if (key == "train.epochs") {
    cfg.train.epochs = parse_size(key, value);
  } else if (key == "train.batch_size") {
    cfg.train.batch_size = parse_size(key, value);
  } else if (key == "train.lr") {
    cfg.train.lr = parse_double(key, value);
  } else if (key == "train.eer_stop") {
    cfg.train.eer_stop = parse_double(key, value);
    // data.*
  } else if (key == "data.num_train") {
    cfg.data.num_train = parse_size(key, value);
  } else if (key == "data.num_eval") {
    cfg.data.num_eval = parse_size(key, value);
  } else if (key == "data.frames_per_utt") {
    cfg.data.frames_per_utt = parse_size(key, value);
  } else if (key == "data.num_harmonics") {
    cfg.data.num_harmonics = parse_size(key, value);
  } else if (key == "data.spoof_fraction") {
    cfg.data.spoof_fraction = parse_double(key, value);
  } else if (key == "data.artifact_kind") {
    cfg.data.artifact_kind = value;
  } else if (key == "data.window_min_frac") {
    cfg.data.window_min_frac = parse_double(key, value);
  } else if (key == "data.window_max_frac") {
    cfg.data.window_max_frac = parse_double(key, value);
  } else if (key == "data.sample_rate") {
    cfg.data.sample_rate = parse_size(key, value);
  } else if (key == "data.train_manifest") {
    cfg.data.train_manifest = value;
  } else if (key == "data.eval_manifest") {
    cfg.data.eval_manifest = value;
  } else if (key == "data.features_dir") {
    cfg.data.features_dir = value;
    // ablate.*
  } else if (key == "ablate.votes") {
    cfg.ablate.votes.clear();
    for (const std::string& item : split_list(value))
      cfg.ablate.votes.push_back(parse_size(key, item));
  } else if (key == "ablate.variants") {
    cfg.ablate.variants = split_list(value);
    for (const std::string& v : cfg.ablate.variants) {
      if (v != "full" && v != "no_enhancement" && v != "no_daff")
        throw ConfigError(key + ": unknown variant '" + v + "'");
    }
    // viz.*
  } else if (key == "viz.max_utts") {
    cfg.viz.max_utts = parse_size(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

FullConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  FullConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(path + ":" + std::to_string(line_no) + ": empty key");
    try {
      set_config_key(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

void apply_override(FullConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw UsageError("override '" + assignment + "' is not of the form key=value");
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  try {
    set_config_key(cfg, key, value);
  } catch (const ConfigError& e) {
    throw UsageError(std::string("bad override: ") + e.what());
  }
}

}  // namespace fgfm
