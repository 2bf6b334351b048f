#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "support/oracles.hpp"

#include "fgfm/errors.hpp"
#include "fgfm/eval.hpp"
#include "fgfm/rng.hpp"

using namespace fgfm;

namespace {

std::vector<ScoreRecord> make_records(const std::vector<double>& bona,
                                      const std::vector<double>& spoof) {
  std::vector<ScoreRecord> r;
  std::size_t i = 0;
  for (double s : bona) r.push_back({"b" + std::to_string(i++), 1, s});
  i = 0;
  for (double s : spoof) r.push_back({"s" + std::to_string(i++), 0, s});
  return r;
}

std::string tmp_dir() {
  const auto dir =
      std::filesystem::temp_directory_path() / "fgfm_eval_tests";
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("separable scores give a zero error rate") {
  const EerResult r = compute_eer(make_records({2.0, 3.0}, {0.0, 1.0}));
  CHECK(r.eer == 0.0);
  CHECK(r.threshold > 1.0);
  CHECK(r.threshold < 2.0);
}

TEST_CASE("inverted scores give a total error rate") {
  const EerResult r = compute_eer(make_records({0.0, 1.0}, {2.0, 3.0}));
  CHECK(r.eer == 1.0);
}

TEST_CASE("a single shared score splits the difference") {
  const EerResult r = compute_eer(make_records({1.0}, {1.0}));
  CHECK(r.eer == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(r.threshold == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("a cross-class tie interpolates between operating points") {
  // bona {0.5, 0.9} vs spoof {0.2, 0.5}: crossing the shared score 0.5 moves
  // both rates at once, so the crossing sits halfway between the surrounding
  // thresholds 0.35 and 0.7 at a rate of 1/4.
  const EerResult lo = compute_eer(make_records({0.5, 0.9}, {0.2, 0.5}));
  CHECK(lo.eer == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(lo.threshold == doctest::Approx(0.525).epsilon(1e-12));

  // mirrored case: rates cross at 3/4
  const EerResult hi = compute_eer(make_records({0.2, 0.5}, {0.5, 0.9}));
  CHECK(hi.eer == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(hi.threshold == doctest::Approx(0.525).epsilon(1e-12));
}

TEST_CASE("the sweep agrees with the brute-force reference") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t nb = 1 + rng.index(40);
    const std::size_t ns = 1 + rng.index(40);
    std::vector<double> bona(nb), spoof(ns);
    const bool quantized = trial % 2 == 0;
    auto draw = [&]() {
      const double s = rng.uniform(-2.0, 2.0);
      // a coarse grid forces score ties within and across the classes
      return quantized ? std::round(s * 4.0) / 4.0 : s;
    };
    for (double& s : bona) s = draw() + 0.3;
    for (double& s : spoof) s = draw() - 0.3;

    const std::vector<ScoreRecord> records = make_records(bona, spoof);
    const EerResult got = compute_eer(records);
    const double want = testsupport::eer_oracle(records);
    CHECK(std::abs(got.eer - want) < 1e-12);
    CHECK(got.eer >= 0.0);
    CHECK(got.eer <= 1.0);
  }
}

TEST_CASE("the error rate is invariant to affine score warps") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> bona(8), spoof(8);
    for (double& s : bona) s = rng.uniform(-1.0, 1.5);
    for (double& s : spoof) s = rng.uniform(-1.5, 1.0);
    const double a = 0.1 + 5.0 * rng.uniform();
    const double b = rng.uniform(-20.0, 20.0);

    std::vector<double> bona_w(8), spoof_w(8);
    for (std::size_t i = 0; i < 8; ++i) {
      bona_w[i] = a * bona[i] + b;
      spoof_w[i] = a * spoof[i] + b;
    }
    const double e1 = compute_eer(make_records(bona, spoof)).eer;
    const double e2 = compute_eer(make_records(bona_w, spoof_w)).eer;
    CHECK(std::abs(e1 - e2) < 1e-12);
  }
}

TEST_CASE("negating scores and swapping labels preserves the error rate") {
  Rng rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> bona(7), spoof(9);
    for (double& s : bona) s = rng.uniform(-1.0, 1.5);
    for (double& s : spoof) s = rng.uniform(-1.5, 1.0);

    std::vector<double> bona_m(spoof), spoof_m(bona);
    for (double& s : bona_m) s = -s;
    for (double& s : spoof_m) s = -s;

    const double e1 = compute_eer(make_records(bona, spoof)).eer;
    const double e2 = compute_eer(make_records(bona_m, spoof_m)).eer;
    CHECK(std::abs(e1 - e2) < 1e-12);
  }
}

TEST_CASE("degenerate score sets are rejected") {
  CHECK_THROWS_AS(compute_eer(make_records({1.0, 2.0}, {})), EvalError);
  CHECK_THROWS_AS(compute_eer(make_records({}, {1.0})), EvalError);
  CHECK_THROWS_AS(compute_eer({}), EvalError);
  CHECK_THROWS_AS(
      compute_eer(make_records({std::nan("")}, {0.0})), EvalError);
}

TEST_CASE("localization averages the in-window fraction over spoofs") {
  const std::vector<std::vector<std::size_t>> selections{
      {1, 2, 9},  // two of three inside the window 0..2
      {0, 1, 2},  // all inside
      {3, 4, 5},  // bonafide: empty mask, skipped
  };
  const std::vector<std::vector<int>> masks{
      {1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
      {1, 1, 1, 0, 0, 0, 0, 0, 0, 0},
      std::vector<int>(10, 0),
  };
  const LocalizationResult r = localization_rate(selections, masks);
  CHECK(r.rate == doctest::Approx((2.0 / 3.0 + 1.0) / 2.0).epsilon(1e-15));
  CHECK(r.chance == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("localization guards its inputs") {
  CHECK_THROWS_AS(localization_rate({{0}}, {{0, 0}, {1, 0}}), DimensionError);
  CHECK_THROWS_AS(localization_rate({{5}}, {{1, 0}}), DimensionError);
  // nothing usable: only unmarked masks
  CHECK_THROWS_AS(localization_rate({{0}}, {{0, 0}}), EvalError);
}

TEST_CASE("score files round-trip and rewrite byte-identically") {
  const std::vector<ScoreRecord> records{
      {"utt_a", 1, 1.234567891},
      {"utt_b", 0, -0.5},
      {"utt_c", 0, 0.0},
  };
  const std::string p1 = tmp_dir() + "/scores1.txt";
  const std::string p2 = tmp_dir() + "/scores2.txt";
  write_score_file(records, p1);
  write_score_file(records, p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(slurp(p1).find("utt_b spoof -0.500000") != std::string::npos);

  const std::vector<ScoreRecord> loaded = read_score_file(p1);
  REQUIRE(loaded.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(loaded[i].utt_id == records[i].utt_id);
    CHECK(loaded[i].label == records[i].label);
    // the on-disk format keeps six decimals
    CHECK(std::abs(loaded[i].score - records[i].score) <= 5e-7);
  }
}

TEST_CASE("score reader flags malformed lines") {
  const std::string path = tmp_dir() + "/bad_scores.txt";
  {
    std::ofstream out(path);
    out << "u0 bonafide 0.5\nu1 maybe 0.1\n";
  }
  try {
    read_score_file(path);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find(":2") != std::string::npos);
    CHECK(std::string(e.what()).find("maybe") != std::string::npos);
  }
  CHECK_THROWS_AS(read_score_file(tmp_dir() + "/nope.txt"), IoError);
}
