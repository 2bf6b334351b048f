#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace fgfm {

struct ScoreRecord {
  std::string utt_id;
  std::size_t label = 0;  // 0 = spoof, 1 = bonafide
  double score = 0.0;     // higher = more bonafide
};

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Sweeps thresholds at score midpoints. FAR(t) = fraction of spoof scores
// >= t, FRR(t) = fraction of bonafide scores < t; the equal-error point is
// found by linear interpolation between the adjacent operating points where
// FAR-FRR changes sign. Throws EvalError unless both labels are present.
EerResult compute_eer(const std::vector<ScoreRecord>& records);

struct LocalizationResult {
  double rate = 0.0;    // mean fraction of selected frames inside the window
  double chance = 0.0;  // mean window length / T
};

// Pairs final-block selections with per-frame artifact masks (same order).
// Utterances whose mask has no marked frame are skipped; if none remain the
// input is unusable and an EvalError is raised.
LocalizationResult localization_rate(
    const std::vector<std::vector<std::size_t>>& selections,
    const std::vector<std::vector<int>>& masks);

// One line per record: "utt_id label score", score with 6 decimal places.
void write_score_file(const std::vector<ScoreRecord>& records,
                      const std::string& path);
std::vector<ScoreRecord> read_score_file(const std::string& path);

}  // namespace fgfm
