#include "fgfm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {

struct OperatingPoint {
  double threshold;
  double far;  // spoof accepted
  double frr;  // bonafide rejected
};

OperatingPoint measure(const std::vector<double>& bona,
                       const std::vector<double>& spoof, double t) {
  std::size_t fa = 0, fr = 0;
  for (double s : spoof)
    if (s >= t) ++fa;
  for (double s : bona)
    if (s < t) ++fr;
  return {t, static_cast<double>(fa) / static_cast<double>(spoof.size()),
          static_cast<double>(fr) / static_cast<double>(bona.size())};
}

}  // namespace

EerResult compute_eer(const std::vector<ScoreRecord>& records) {
  std::vector<double> bona, spoof;
  for (const ScoreRecord& r : records) {
    if (!std::isfinite(r.score))
      throw EvalError("non-finite score for utterance " + r.utt_id);
    (r.label == 1 ? bona : spoof).push_back(r.score);
  }
  if (bona.empty() || spoof.empty())
    throw EvalError("EER needs both bonafide and spoof scores (got " +
                    std::to_string(bona.size()) + " bonafide, " +
                    std::to_string(spoof.size()) + " spoof)");

  // Candidate thresholds: below every score, the midpoints between adjacent
  // distinct scores, and above every score.
  std::vector<double> all;
  all.reserve(records.size());
  for (const ScoreRecord& r : records) all.push_back(r.score);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds;
  thresholds.reserve(all.size() + 1);
  thresholds.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i)
    thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  thresholds.push_back(all.back() + 1.0);

  // FAR is nonincreasing and FRR nondecreasing in t, so FAR-FRR crosses
  // zero exactly once over the sweep. Below every score FAR=1, FRR=0.
  OperatingPoint prev = measure(bona, spoof, thresholds.front());
  for (std::size_t i = 1; i < thresholds.size(); ++i) {
    const OperatingPoint cur = measure(bona, spoof, thresholds[i]);
    const double diff = cur.far - cur.frr;
    if (diff == 0.0) return {cur.far, cur.threshold};
    if (diff < 0.0) {
      const double prev_diff = prev.far - prev.frr;
      const double alpha = prev_diff / (prev_diff - diff);
      return {prev.far + alpha * (cur.far - prev.far),
              prev.threshold + alpha * (cur.threshold - prev.threshold)};
    }
    prev = cur;
  }
  // Unreachable: at the top threshold FAR=0 and FRR=1, so diff < 0 there.
  throw EvalError("EER sweep failed to find a crossing");
}

LocalizationResult localization_rate(
    const std::vector<std::vector<std::size_t>>& selections,
    const std::vector<std::vector<int>>& masks) {
  if (selections.size() != masks.size())
    throw DimensionError("localization_rate: " +
                         std::to_string(selections.size()) +
                         " selections vs " + std::to_string(masks.size()) +
                         " masks");
  double rate_sum = 0.0, chance_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t u = 0; u < selections.size(); ++u) {
    const std::vector<int>& mask = masks[u];
    const std::size_t marked = static_cast<std::size_t>(
        std::count(mask.begin(), mask.end(), 1));
    if (mask.empty() || marked == 0 || selections[u].empty()) continue;
    std::size_t inside = 0;
    for (std::size_t idx : selections[u]) {
      if (idx >= mask.size())
        throw DimensionError("localization_rate: selected frame " +
                             std::to_string(idx) + " outside mask of length " +
                             std::to_string(mask.size()));
      if (mask[idx] == 1) ++inside;
    }
    rate_sum += static_cast<double>(inside) /
                static_cast<double>(selections[u].size());
    chance_sum += static_cast<double>(marked) / static_cast<double>(mask.size());
    ++used;
  }
  if (used == 0)
    throw EvalError("localization_rate: no utterance with a marked window");
  return {rate_sum / static_cast<double>(used),
          chance_sum / static_cast<double>(used)};
}

void write_score_file(const std::vector<ScoreRecord>& records,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open score file for writing: " + path);
  char line[256];
  for (const ScoreRecord& r : records) {
    std::snprintf(line, sizeof line, "%s %s %.6f\n", r.utt_id.c_str(),
                  r.label == 1 ? "bonafide" : "spoof", r.score);
    out << line;
  }
  if (!out) throw IoError("failed writing score file: " + path);
}

std::vector<ScoreRecord> read_score_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file: " + path);
  std::vector<ScoreRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    ScoreRecord r;
    std::string label;
    if (!(fields >> r.utt_id >> label >> r.score))
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": malformed score line");
    if (label == "bonafide") {
      r.label = 1;
    } else if (label == "spoof") {
      r.label = 0;
    } else {
      throw FormatError(path + ":" + std::to_string(line_no) +
                        ": unknown label '" + label + "'");
    }
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace fgfm
