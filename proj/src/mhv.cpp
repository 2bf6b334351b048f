#include "fgfm/mhv.hpp"

#include <string>

#include "fgfm/errors.hpp"
#include "fgfm/ops.hpp"

namespace fgfm {

const std::vector<double>& enhancement_kernel() {
  static const std::vector<double> kernel{1, 2, 3, 4, 3, 2, 1};
  return kernel;
}

std::vector<int> vote_per_head(const std::vector<double>& attn_row,
                               std::size_t v) {
  std::vector<int> map(attn_row.size(), 0);
  for (std::size_t idx : topk_indices(attn_row, v)) map[idx] = 1;
  return map;
}

std::vector<int> aggregate_votes(const std::vector<std::vector<int>>& maps) {
  if (maps.empty()) throw DimensionError("aggregate_votes: no vote maps");
  std::vector<int> total(maps.front().size(), 0);
  for (const std::vector<int>& m : maps) {
    if (m.size() != total.size())
      throw DimensionError("aggregate_votes: map length " +
                           std::to_string(m.size()) + " != " +
                           std::to_string(total.size()));
    for (std::size_t i = 0; i < m.size(); ++i) total[i] += m[i];
  }
  return total;
}

std::vector<double> enhance(const std::vector<int>& m_prime) {
  Tensor signal(Shape{m_prime.size()});
  for (std::size_t i = 0; i < m_prime.size(); ++i)
    signal.at(i) = static_cast<double>(m_prime[i]);
  const std::vector<double>& g = enhancement_kernel();
  Tensor out = conv1d_same(signal, Tensor(Shape{g.size()}, g));
  return out.values();
}

SelectionResult select_frames(const BlockOutput& block_out, std::size_t v,
                              std::size_t source_block,
                              bool enhancement_enabled) {
  const auto& attn = block_out.cls_attention;
  if (attn.rows.empty())
    throw DimensionError("select_frames: block has no attention rows");
  const std::size_t t = attn.rows.front().size();
  if (block_out.sequence.dim(0) != t + 1)
    throw DimensionError("select_frames: sequence length " +
                         std::to_string(block_out.sequence.dim(0)) +
                         " does not match attention row length " +
                         std::to_string(t));
  if (v < 1 || v > t)
    throw SelectionError("select_frames: cannot pick " + std::to_string(v) +
                         " of " + std::to_string(t) + " frames");

  std::vector<std::vector<int>> per_head;
  per_head.reserve(attn.rows.size());
  for (const std::vector<double>& row : attn.rows)
    per_head.push_back(vote_per_head(row, v));

  SelectionResult result;
  result.source_block = source_block;
  result.score_map.votes = aggregate_votes(per_head);
  result.score_map.enhanced = enhance(result.score_map.votes);

  if (enhancement_enabled) {
    result.indices = topk_indices(result.score_map.enhanced, v);
  } else {
    std::vector<double> raw(t);
    for (std::size_t i = 0; i < t; ++i)
      raw[i] = static_cast<double>(result.score_map.votes[i]);
    result.indices = topk_indices(raw, v);
  }

  std::vector<std::size_t> seq_rows(v);
  for (std::size_t i = 0; i < v; ++i) seq_rows[i] = result.indices[i] + 1;
  result.representations = gather_rows(block_out.sequence, seq_rows);
  return result;
}

}  // namespace fgfm
