#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fgfm/config.hpp"

namespace fgfm {

// Command implementations live in the library so tests can call them
// directly; tools/main.cpp only parses arguments and maps exceptions to
// exit codes. Relative dataset/output paths resolve against out_dir, so one
// --out directory holds a whole experiment.

struct TrainOutcome {
  double final_eer = 0.0;
  std::string checkpoint_path;
  std::string score_path;
  std::string log_path;
};

// Writes <out>/train_manifest.txt-style splits per cfg.data.
void cmd_gen_data(const FullConfig& cfg, const std::string& out_dir);

// Trains per config; writes checkpoint.bin, training_log.txt, scores.txt.
TrainOutcome cmd_train(const FullConfig& cfg, const std::string& out_dir);

struct EvalOutcome {
  double eer = 0.0;
  double threshold = 0.0;
  std::string score_path;
};

// Scores the eval split with a saved checkpoint; writes eval_scores.txt and
// eval_results.txt.
EvalOutcome cmd_eval(const FullConfig& cfg, const std::string& checkpoint_path,
                     const std::string& out_dir);

struct AblateCell {
  std::string variant;  // full | no_enhancement | no_daff
  std::size_t votes = 0;
  double eer = 0.0;
};

// Trains every (variant, votes) cell with a shared seed; writes
// ablate_results.txt and returns the table.
std::vector<AblateCell> cmd_ablate(const FullConfig& cfg,
                                   const std::string& out_dir);

// Exports per-utterance selection records (JSON) and heatmap overlays (BMP)
// for the first viz.max_utts eval utterances.
void cmd_visualize(const FullConfig& cfg, const std::string& checkpoint_path,
                   const std::string& out_dir);

// Path helper shared with tests: absolute paths pass through, relative ones
// attach to dir.
std::string resolve_path(const std::string& dir, const std::string& path);

// Full argv entry point: parse, dispatch, map errors to exit codes
// (0 ok, 2 usage/config, 3 data/format/IO, 4 numeric/training).
int run_cli(int argc, const char* const* argv);

}  // namespace fgfm
