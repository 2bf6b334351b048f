#pragma once

#include <cstddef>
#include <vector>

#include "fgfm/encoder.hpp"
#include "fgfm/tensor.hpp"

namespace fgfm {

// Multi-head voting: each head's CLS attention row votes for its top-v
// frames; votes are summed across heads, smoothed with a fixed kernel, and
// the v highest-scoring frames are selected. No trainable parameters —
// learning reaches the votes only through the attention weights.

// The fixed smoothing kernel, used unnormalized with zero padding.
const std::vector<double>& enhancement_kernel();

struct ScoreMap {
  std::vector<int> votes;        // summed votes M', entries in [0, K]
  std::vector<double> enhanced;  // smoothed scores M*
};

struct SelectionResult {
  std::vector<std::size_t> indices;  // ascending frame indices, length v
  Tensor representations;            // [v, D] block-output rows
  std::size_t source_block = 0;
  ScoreMap score_map;  // kept for inspection/visualization
};

// Binary map with the top-v entries of attn_row set (ties: lowest index).
std::vector<int> vote_per_head(const std::vector<double>& attn_row,
                               std::size_t v);

// Elementwise sum of K binary maps.
std::vector<int> aggregate_votes(const std::vector<std::vector<int>>& maps);

// Smooths the summed votes with the fixed kernel, zero padded.
std::vector<double> enhance(const std::vector<int>& m_prime);

// Full pipeline over one block's CLS attention; gathers the selected rows
// from the block's output sequence (frame i lives at sequence row i+1, so
// the classification token is never a candidate). With enhancement disabled
// the top-v runs directly on the summed votes.
SelectionResult select_frames(const BlockOutput& block_out, std::size_t v,
                              std::size_t source_block = 0,
                              bool enhancement_enabled = true);

}  // namespace fgfm
