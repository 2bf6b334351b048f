#include "fgfm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "CLI11.hpp"
#include "json.hpp"

#include "fgfm/checkpoint.hpp"
#include "fgfm/errors.hpp"
#include "fgfm/image.hpp"
#include "fgfm/ops.hpp"

namespace fs = std::filesystem;

namespace fgfm {

namespace {

constexpr std::uint64_t kStreamTrainSplit = 0x7A;
constexpr std::uint64_t kStreamEvalSplit = 0x7B;
constexpr std::uint64_t kStreamShuffle = 0x5E;

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Regenerates a split from its manifest; attaches stored features when the
// model consumes precomputed features instead of waveforms.
std::vector<Utterance> load_split(const FullConfig& cfg,
                                  const std::string& out_dir,
                                  const std::string& manifest) {
  std::vector<Utterance> utts =
      load_dataset(resolve_path(out_dir, manifest), cfg.data);
  if (cfg.model.frontend == FrontendKind::feature_file) {
    const std::string dir = resolve_path(
        out_dir,
        cfg.data.features_dir.empty() ? "features" : cfg.data.features_dir);
    for (Utterance& u : utts)
      u.features = read_feature_file(join(dir, u.utt_id + ".fgft"));
  }
  return utts;
}

}  // namespace

std::string resolve_path(const std::string& dir, const std::string& path) {
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(dir) / p).string();
}

void cmd_gen_data(const FullConfig& cfg, const std::string& out_dir) {
  validate(cfg.data);
  fs::create_directories(out_dir);
  const std::vector<Utterance> train =
      generate_split(cfg.data, cfg.data.num_train,
                     derive_seed(cfg.model.seed, kStreamTrainSplit), "train_");
  const std::vector<Utterance> eval_split =
      generate_split(cfg.data, cfg.data.num_eval,
                     derive_seed(cfg.model.seed, kStreamEvalSplit), "eval_");
  const std::string train_path = resolve_path(out_dir, cfg.data.train_manifest);
  const std::string eval_path = resolve_path(out_dir, cfg.data.eval_manifest);
  write_manifest(train, train_path);
  write_manifest(eval_split, eval_path);
  std::cout << "wrote " << train.size() << " train utterances to " << train_path
            << "\nwrote " << eval_split.size() << " eval utterances to "
            << eval_path << "\n";
}

TrainOutcome cmd_train(const FullConfig& cfg, const std::string& out_dir) {
  validate(cfg.model);
  validate(cfg.data);
  if (cfg.train.epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (cfg.train.batch_size == 0)
    throw ConfigError("train.batch_size must be >= 1");
  fs::create_directories(out_dir);

  const std::vector<Utterance> train_utts =
      load_split(cfg, out_dir, cfg.data.train_manifest);
  const std::vector<Utterance> eval_utts =
      load_split(cfg, out_dir, cfg.data.eval_manifest);

  ModelParameters params = init_model(cfg.model);
  AdamConfig opt_cfg;
  opt_cfg.lr = cfg.train.lr;
  Adam opt(params.all(cfg.model), opt_cfg);

  const std::string log_path = join(out_dir, "training_log.txt");
  std::ofstream log(log_path);
  if (!log) throw IoError("cannot open training log: " + log_path);

  Rng shuffle_rng(derive_seed(cfg.model.seed, kStreamShuffle));
  std::vector<std::size_t> order(train_utts.size());
  std::iota(order.begin(), order.end(), 0);

  char line[160];
  for (std::size_t epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += cfg.train.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + cfg.train.batch_size);
      std::vector<const Utterance*> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i)
        batch.push_back(&train_utts[order[i]]);
      loss_sum += train_step(batch, cfg.model, params, opt);
      ++batches;
    }

    const EerResult dev =
        compute_eer(score_dataset(eval_utts, cfg.model, params));
    std::snprintf(line, sizeof line, "epoch %zu loss %.6f eer %.6f", epoch,
                  loss_sum / static_cast<double>(batches), dev.eer);
    log << line << '\n';
    std::cout << line << '\n';
    if (cfg.train.eer_stop > 0.0 && dev.eer <= cfg.train.eer_stop) break;
  }

  // Round to checkpoint precision before the logged final metrics, so a
  // later eval of the saved file reproduces them exactly.
  quantize_to_checkpoint_precision(params, cfg.model);
  const std::vector<ScoreRecord> final_scores =
      score_dataset(eval_utts, cfg.model, params);
  const EerResult final_eer = compute_eer(final_scores);

  TrainOutcome outcome;
  outcome.final_eer = final_eer.eer;
  outcome.log_path = log_path;
  outcome.score_path = join(out_dir, "scores.txt");
  outcome.checkpoint_path = join(out_dir, "checkpoint.bin");
  write_score_file(final_scores, outcome.score_path);
  save_checkpoint(outcome.checkpoint_path, cfg.model, params);
  std::snprintf(line, sizeof line, "final eer %.9f", final_eer.eer);
  log << line << '\n';
  std::cout << line << '\n';
  return outcome;
}

EvalOutcome cmd_eval(const FullConfig& cfg, const std::string& checkpoint_path,
                     const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(resolve_path(out_dir, checkpoint_path));
  fs::create_directories(out_dir);
  FullConfig eff = cfg;
  eff.model = ckpt.config;  // the stored model shape wins over the file's
  const std::vector<Utterance> eval_utts =
      load_split(eff, out_dir, cfg.data.eval_manifest);

  const std::vector<ScoreRecord> records =
      score_dataset(eval_utts, ckpt.config, ckpt.params);
  const EerResult result = compute_eer(records);

  EvalOutcome outcome;
  outcome.eer = result.eer;
  outcome.threshold = result.threshold;
  outcome.score_path = join(out_dir, "eval_scores.txt");
  write_score_file(records, outcome.score_path);

  const std::string results_path = join(out_dir, "eval_results.txt");
  std::ofstream results(results_path);
  if (!results) throw IoError("cannot open " + results_path);
  char line[96];
  std::snprintf(line, sizeof line, "eer %.9f\nthreshold %.9f", result.eer,
                result.threshold);
  results << line << '\n';
  std::cout << line << '\n';
  return outcome;
}

std::vector<AblateCell> cmd_ablate(const FullConfig& cfg,
                                   const std::string& out_dir) {
  std::vector<std::size_t> votes = cfg.ablate.votes;
  if (votes.empty()) votes.push_back(cfg.model.votes);
  if (cfg.ablate.variants.empty())
    throw UsageError("ablation grid is empty (no variants)");

  fs::create_directories(out_dir);
  std::vector<AblateCell> cells;
  for (const std::string& variant : cfg.ablate.variants) {
    for (std::size_t v : votes) {
      FullConfig cell = cfg;
      cell.model.votes = v;
      cell.model.no_daff = false;
      cell.model.no_enhancement = false;
      if (variant == "no_enhancement") {
        cell.model.no_enhancement = true;
      } else if (variant == "no_daff") {
        cell.model.no_daff = true;
      } else if (variant != "full") {
        throw UsageError("unknown ablation variant '" + variant + "'");
      }
      // Cells share the parent's dataset; pin the paths (made absolute so
      // they survive re-resolution against the per-cell directory).
      cell.data.train_manifest =
          fs::absolute(resolve_path(out_dir, cfg.data.train_manifest)).string();
      cell.data.eval_manifest =
          fs::absolute(resolve_path(out_dir, cfg.data.eval_manifest)).string();
      if (!cfg.data.features_dir.empty())
        cell.data.features_dir =
            fs::absolute(resolve_path(out_dir, cfg.data.features_dir)).string();

      const std::string cell_dir =
          join(out_dir, "ablate_" + variant + "_v" + std::to_string(v));
      std::cout << "=== cell " << variant << " v=" << v << " ===\n";
      const TrainOutcome out = cmd_train(cell, cell_dir);
      cells.push_back({variant, v, out.final_eer});
    }
  }

  const std::string table_path = join(out_dir, "ablate_results.txt");
  std::ofstream table(table_path);
  if (!table) throw IoError("cannot open " + table_path);
  char eer_text[32];
  std::cout << "variant            votes  eer\n";
  for (const AblateCell& c : cells) {
    std::snprintf(eer_text, sizeof eer_text, "%.6f", c.eer);
    table << c.variant << ' ' << c.votes << ' ' << eer_text << '\n';
    std::printf("%-18s %-6zu %s\n", c.variant.c_str(), c.votes, eer_text);
  }
  return cells;
}

namespace {

// Spectrogram-style energy map from the first frontend convolution (or the
// raw features), with markers at the finally selected frames.
void render_overlay(const Utterance& utt, const ModelConfig& cfg,
                    const ModelParameters& params,
                    const std::vector<std::size_t>& selected,
                    const std::string& path) {
  Tensor heat;  // [time, channels]
  std::size_t cols_per_frame = 1;
  if (cfg.frontend == FrontendKind::toy_conv) {
    Tensor x(Shape{utt.waveform.size(), 1}, utt.waveform);
    heat = gelu(conv1d_strided(x, params.conv1_w, params.conv1_b,
                               cfg.conv1_stride));
    cols_per_frame = cfg.conv2_stride;
  } else {
    heat = utt.features;
  }

  const std::size_t width = heat.dim(0);
  const std::size_t channels = heat.dim(1);
  const std::size_t band = 6;  // pixels per channel row
  const std::size_t mask_band = 8;
  const std::size_t height = channels * band + mask_band;

  double peak = 0.0;
  for (std::size_t i = 0; i < heat.size(); ++i)
    peak = std::max(peak, std::abs(heat.at(i)));
  if (peak == 0.0) peak = 1.0;

  std::vector<std::uint8_t> rgb(width * height * 3, 0);
  auto put = [&](std::size_t x, std::size_t y, std::uint8_t r, std::uint8_t g,
                 std::uint8_t b) {
    const std::size_t p = (y * width + x) * 3;
    rgb[p] = r;
    rgb[p + 1] = g;
    rgb[p + 2] = b;
  };

  for (std::size_t x = 0; x < width; ++x) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double m = std::abs(heat.at(x, c)) / peak;
      const auto v = static_cast<std::uint8_t>(std::lround(255.0 * m));
      // low channels at the bottom, like a spectrogram
      const std::size_t y0 = (channels - 1 - c) * band;
      for (std::size_t dy = 0; dy < band; ++dy)
        put(x, y0 + dy, v, v, static_cast<std::uint8_t>(64 + (191 * v) / 255));
    }
  }

  // artifact window strip along the bottom
  for (std::size_t f = 0; f < utt.artifact_mask.size(); ++f) {
    if (utt.artifact_mask[f] != 1) continue;
    for (std::size_t dx = 0; dx < cols_per_frame; ++dx) {
      const std::size_t x = f * cols_per_frame + dx;
      if (x >= width) break;
      for (std::size_t dy = 0; dy < mask_band; ++dy)
        put(x, channels * band + dy, 0, 200, 0);
    }
  }

  // red vertical markers at selected frames
  for (std::size_t f : selected) {
    const std::size_t x = f * cols_per_frame + cols_per_frame / 2;
    if (x >= width) continue;
    for (std::size_t y = 0; y < height; ++y) put(x, y, 255, 0, 0);
  }

  write_bmp(path, width, height, rgb);
}

}  // namespace

void cmd_visualize(const FullConfig& cfg, const std::string& checkpoint_path,
                   const std::string& out_dir) {
  Checkpoint ckpt = load_checkpoint(resolve_path(out_dir, checkpoint_path));
  FullConfig eff = cfg;
  eff.model = ckpt.config;
  const std::vector<Utterance> utts =
      load_split(eff, out_dir, cfg.data.eval_manifest);

  const std::string viz_dir = join(out_dir, "visualize");
  fs::create_directories(viz_dir);
  const std::size_t count = std::min(cfg.viz.max_utts, utts.size());
  for (std::size_t i = 0; i < count; ++i) {
    const Utterance& utt = utts[i];
    Tensor frames = embed(utt, ckpt.config, ckpt.params);
    const ForwardResult out = forward(frames, ckpt.config, ckpt.params);

    nlohmann::json j;
    j["utt_id"] = utt.utt_id;
    j["label"] = utt.label == 1 ? "bonafide" : "spoof";
    j["artifact_kind"] = artifact_kind_to_string(utt.artifact_kind);
    j["mask"] = utt.label == 1 ? std::vector<int>{} : utt.artifact_mask;
    j["blocks"] = nlohmann::json::array();
    for (const SelectionResult& sel : out.diag.selections) {
      nlohmann::json jb;
      jb["block"] = sel.source_block;
      jb["selected"] = sel.indices;
      jb["votes"] = sel.score_map.votes;
      jb["enhanced"] = sel.score_map.enhanced;
      j["blocks"].push_back(std::move(jb));
    }
    if (out.diag.has_cross) {
      nlohmann::json jc;
      jc["block"] = out.diag.cross_selection.source_block;
      jc["selected"] = out.diag.cross_selection.indices;
      jc["votes"] = out.diag.cross_selection.score_map.votes;
      jc["enhanced"] = out.diag.cross_selection.score_map.enhanced;
      j["cross_selection"] = std::move(jc);
    }
    const std::string json_path = join(viz_dir, utt.utt_id + ".json");
    std::ofstream jf(json_path);
    if (!jf) throw IoError("cannot open " + json_path);
    jf << j.dump(2) << '\n';

    std::vector<std::size_t> selected;
    if (!out.diag.selections.empty())
      selected = out.diag.selections.back().indices;
    render_overlay(utt, ckpt.config, ckpt.params, selected,
                   join(viz_dir, utt.utt_id + ".bmp"));
  }
  std::cout << "exported " << count << " utterances to " << viz_dir << "\n";
}

int run_cli(int argc, const char* const* argv) {
  std::string config_path, out_dir = ".", checkpoint_path;
  std::vector<std::string> overrides, flag_overrides;

  CLI::App app{"fine-grained frame selection for speech deepfake detection"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub, bool needs_checkpoint) {
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--out", out_dir, "output directory (default .)");
    sub->add_option("--set", overrides, "config override key=value")
        ->take_all();
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](std::uint64_t s) {
          flag_overrides.push_back("model.seed=" + std::to_string(s));
        },
        "run seed");
    sub->add_option_function<std::size_t>(
        "--votes",
        [&](std::size_t v) {
          flag_overrides.push_back("model.votes=" + std::to_string(v));
        },
        "frames selected per head/block");
    sub->add_flag_callback(
        "--no-daff",
        [&]() { flag_overrides.push_back("model.no_daff=true"); },
        "classify on the cross feature, skipping fusion");
    sub->add_flag_callback(
        "--no-enhancement",
        [&]() { flag_overrides.push_back("model.no_enhancement=true"); },
        "vote without kernel smoothing");
    if (needs_checkpoint)
      sub->add_option("--checkpoint", checkpoint_path, "model checkpoint")
          ->required();
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  CLI::App* ablate = app.add_subcommand("ablate", "run an ablation grid");
  CLI::App* visualize =
      app.add_subcommand("visualize", "export selection overlays");
  CLI::App* gen_data =
      app.add_subcommand("gen-data", "generate dataset manifests");
  add_common(train, false);
  add_common(eval, true);
  add_common(ablate, false);
  add_common(visualize, true);
  add_common(gen_data, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    FullConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    for (const std::string& o : overrides) apply_override(cfg, o);
    for (const std::string& o : flag_overrides) apply_override(cfg, o);

    if (train->parsed()) {
      cmd_train(cfg, out_dir);
    } else if (eval->parsed()) {
      cmd_eval(cfg, checkpoint_path, out_dir);
    } else if (ablate->parsed()) {
      cmd_ablate(cfg, out_dir);
    } else if (visualize->parsed()) {
      cmd_visualize(cfg, checkpoint_path, out_dir);
    } else if (gen_data->parsed()) {
      cmd_gen_data(cfg, out_dir);
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SelectionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const EvalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fgfm
