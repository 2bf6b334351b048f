#include "doctest.h"

#include <vector>

#include "fgfm/errors.hpp"
#include "fgfm/mhv.hpp"
#include "fgfm/rng.hpp"
#include "support/oracles.hpp"

using namespace fgfm;

namespace {

// Builds a block output whose CLS attention rows are fully hand-specified.
// Sequence row r is the constant (100 + r), so gathered representations are
// trivially identifiable.
BlockOutput make_block(const std::vector<std::vector<double>>& rows,
                       std::size_t dim = 3) {
  BlockOutput out;
  const std::size_t t = rows.front().size();
  out.sequence = Tensor(Shape{t + 1, dim});
  for (std::size_t r = 0; r < t + 1; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      out.sequence.at(r, c) = 100.0 + static_cast<double>(r);
  out.cls_attention.rows = rows;
  out.cls_attention.cls_self.assign(rows.size(), 0.0);
  return out;
}

// Attention row of length t with high weights at `top` (descending by list
// order) and small distinct values elsewhere.
std::vector<double> row_with_top(std::size_t t,
                                 const std::vector<std::size_t>& top) {
  std::vector<double> row(t);
  for (std::size_t i = 0; i < t; ++i)
    row[i] = 0.001 * static_cast<double>(i + 1);
  double w = 0.9;
  for (std::size_t idx : top) {
    row[idx] = w;
    w -= 0.1;
  }
  return row;
}

}  // namespace

TEST_CASE("smoothing kernel is the fixed seven-tap ramp") {
  const std::vector<double> expected{1, 2, 3, 4, 3, 2, 1};
  CHECK(enhancement_kernel() == expected);
}

TEST_CASE("enhance spreads an isolated vote over its neighborhood") {
  // Hand-computed: a single count of 2 at index 2 against taps {1,2,3,4,3,2,1}
  // lands 2*{2,3,4,3} on indices 0..3 (left taps fall off the edge).
  const std::vector<double> out = enhance({0, 0, 2, 0});
  const std::vector<double> expected{4, 6, 8, 6};
  CHECK(out == expected);
}

TEST_CASE("enhance keeps mass near a spike inside a longer map") {
  std::vector<int> votes(20, 0);
  votes[9] = 4;
  const std::vector<double> out = enhance(votes);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i + 3 >= 9 && i <= 12) {
      CHECK(out[i] > 0.0);
    } else {
      CHECK(out[i] == 0.0);
    }
  }
  CHECK(out[9] == 16.0);  // center tap 4 * vote 4
}

TEST_CASE("vote_per_head marks the top entries, ties to the lowest index") {
  CHECK(vote_per_head({0.1, 0.7, 0.2}, 1) == std::vector<int>{0, 1, 0});
  CHECK(vote_per_head({0.3, 0.3, 0.1}, 1) == std::vector<int>{1, 0, 0});
  CHECK(vote_per_head({0.2, 0.5, 0.2, 0.1}, 3) == std::vector<int>{1, 1, 1, 0});
}

TEST_CASE("aggregate_votes sums maps and rejects ragged input") {
  const std::vector<int> total =
      aggregate_votes({{1, 0, 1}, {1, 1, 0}, {1, 0, 0}});
  CHECK(total == std::vector<int>{3, 1, 1});
  CHECK_THROWS_AS(aggregate_votes({{1, 0}, {1, 0, 1}}), DimensionError);
  CHECK_THROWS_AS(aggregate_votes({}), DimensionError);
}

TEST_CASE("smoothing favors a run of agreeing votes over an isolated spike") {
  // Three heads all vote index 0; their remaining votes tile the run 4..8
  // plus index 10. Summed votes: index 0 -> 3, indices {4..8,10} -> 1.
  // Without smoothing the top-3 is {0,4,5}; with smoothing the run wins:
  // scores peak at 14 on {6,7} and 13 on {5}.
  const std::size_t t = 14;
  BlockOutput block = make_block({row_with_top(t, {0, 4, 5}),
                                  row_with_top(t, {0, 6, 7}),
                                  row_with_top(t, {0, 8, 10})});

  SelectionResult with = select_frames(block, 3, 7, true);
  CHECK(with.indices == std::vector<std::size_t>{5, 6, 7});
  CHECK(with.score_map.votes ==
        std::vector<int>{3, 0, 0, 0, 1, 1, 1, 1, 1, 0, 1, 0, 0, 0});
  CHECK(with.score_map.enhanced[0] == 12.0);
  CHECK(with.score_map.enhanced[6] == 14.0);
  CHECK(with.source_block == 7);

  SelectionResult without = select_frames(block, 3, 7, false);
  CHECK(without.indices == std::vector<std::size_t>{0, 4, 5});
}

TEST_CASE("select_frames gathers sequence rows shifted past the token") {
  BlockOutput block = make_block({row_with_top(6, {1, 4})});
  // smoothing off so the two voted frames are selected as-is
  SelectionResult sel = select_frames(block, 2, 0, false);
  CHECK(sel.indices == std::vector<std::size_t>{1, 4});
  // frame i sits at sequence row i+1
  CHECK(sel.representations.dim(0) == 2);
  CHECK(sel.representations.at(0, 0) == 102.0);
  CHECK(sel.representations.at(1, 0) == 105.0);
}

TEST_CASE("select_frames validates its inputs") {
  BlockOutput block = make_block({row_with_top(5, {0})});
  CHECK_THROWS_AS(select_frames(block, 0), SelectionError);
  CHECK_THROWS_AS(select_frames(block, 6), SelectionError);

  BlockOutput no_rows;
  no_rows.sequence = Tensor(Shape{4, 2});
  CHECK_THROWS_AS(select_frames(no_rows, 1), DimensionError);

  BlockOutput mismatched = make_block({row_with_top(5, {0})});
  mismatched.sequence = Tensor(Shape{5, 2});  // should be t+1 = 6
  CHECK_THROWS_AS(select_frames(mismatched, 1), DimensionError);
}

TEST_CASE("pipeline matches the repeated-scan reference on random maps") {
  Rng rng(20240817);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t t = 2 + rng.index(15);       // 2..16
    const std::size_t k = 1 + rng.index(4);        // 1..4
    const std::size_t v = 1 + rng.index(std::min<std::size_t>(4, t));
    std::vector<std::vector<double>> rows(k, std::vector<double>(t));
    for (auto& row : rows)
      for (double& x : row) x = rng.uniform();

    for (bool enhancement : {true, false}) {
      const SelectionResult got =
          select_frames(make_block(rows), v, 0, enhancement);
      const testsupport::MhvOracle want =
          testsupport::mhv_oracle(rows, v, enhancement);
      CHECK(got.indices == want.selected);
      CHECK(got.score_map.votes == want.votes);
      CHECK(got.score_map.enhanced == want.enhanced);

      int vote_sum = 0;
      for (int m : got.score_map.votes) vote_sum += m;
      CHECK(vote_sum == static_cast<int>(k * v));
      CHECK(std::is_sorted(got.indices.begin(), got.indices.end()));
    }
  }
}

TEST_CASE("selection is invariant to positive rescaling of attention rows") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = 6 + rng.index(10);
    const std::size_t k = 1 + rng.index(4);
    const std::size_t v = 1 + rng.index(4);
    std::vector<std::vector<double>> rows(k, std::vector<double>(t));
    for (auto& row : rows)
      for (double& x : row) x = rng.uniform();

    std::vector<std::vector<double>> scaled = rows;
    const double factor = 0.05 + 10.0 * rng.uniform();
    for (auto& row : scaled)
      for (double& x : row) x *= factor;

    const SelectionResult a = select_frames(make_block(rows), v);
    const SelectionResult b = select_frames(make_block(scaled), v);
    CHECK(a.indices == b.indices);
    CHECK(a.score_map.votes == b.score_map.votes);
  }
}
