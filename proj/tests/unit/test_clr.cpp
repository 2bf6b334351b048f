#include "doctest.h"

#include <vector>

#include "support/finite_diff.hpp"
#include "support/test_util.hpp"

#include "fgfm/clr.hpp"
#include "fgfm/errors.hpp"
#include "fgfm/ops.hpp"

using namespace fgfm;
using testsupport::max_grad_error;
using testsupport::random_tensor;

namespace {

EncoderConfig tiny_cfg() {
  EncoderConfig cfg;
  cfg.embed_dim = 4;
  cfg.num_heads = 2;
  cfg.num_blocks = 2;
  cfg.ffn_expansion = 2;
  return cfg;
}

SelectionResult fake_selection(const std::vector<std::size_t>& indices,
                               double base, std::size_t d = 4) {
  SelectionResult sel;
  sel.indices = indices;
  sel.representations = Tensor(Shape{indices.size(), d});
  for (std::size_t r = 0; r < indices.size(); ++r)
    for (std::size_t c = 0; c < d; ++c)
      sel.representations.at(r, c) = base + 10.0 * static_cast<double>(r);
  return sel;
}

void zero_out(Tensor t) {
  for (double& v : t.values()) v = 0.0;
}

}  // namespace

TEST_CASE("cross input stacks the token and selections in block order") {
  Tensor cls(Shape{4}, {1.0, 2.0, 3.0, 4.0});
  const Tensor x = build_cross_input(
      cls, {fake_selection({0, 3}, 100.0), fake_selection({1, 2}, 200.0)});
  REQUIRE(x.dim(0) == 5);
  REQUIRE(x.dim(1) == 4);
  CHECK(x.at(0, 1) == 2.0);
  CHECK(x.at(1, 0) == 100.0);
  CHECK(x.at(2, 0) == 110.0);
  CHECK(x.at(3, 0) == 200.0);
  CHECK(x.at(4, 0) == 210.0);
}

TEST_CASE("cross input validation") {
  Tensor cls(Shape{4}, {1.0, 2.0, 3.0, 4.0});
  CHECK_THROWS_AS(build_cross_input(cls, {}), DimensionError);
  CHECK_THROWS_AS(
      build_cross_input(cls, {fake_selection({0, 3}, 1.0),
                              fake_selection({1}, 2.0)}),
      DimensionError);
  Tensor cls2(Shape{1, 4});
  CHECK_THROWS_AS(build_cross_input(cls2, {fake_selection({0}, 1.0)}),
                  DimensionError);
}

TEST_CASE("the extra block re-votes over the pooled candidates") {
  const EncoderConfig cfg = tiny_cfg();
  Rng rng(21);
  const BlockParams p = init_block_params(cfg, rng);
  Tensor x_in = random_tensor({5, cfg.embed_dim}, rng);  // token + 4 candidates

  const CrossBlockResult res = cross_layer_block(x_in, p, cfg, 2);
  CHECK(res.sel.source_block == cfg.num_blocks + 1);
  REQUIRE(res.sel.indices.size() == 2);
  CHECK(res.sel.indices[0] < res.sel.indices[1]);
  CHECK(res.sel.indices[1] < 4);

  REQUIRE(res.f_cross.dim(0) == 3);
  for (std::size_t c = 0; c < cfg.embed_dim; ++c) {
    CHECK(res.f_cross.at(0, c) == res.block.sequence.at(0, c));
    CHECK(res.f_cross.at(1, c) ==
          res.block.sequence.at(res.sel.indices[0] + 1, c));
    CHECK(res.f_cross.at(2, c) ==
          res.block.sequence.at(res.sel.indices[1] + 1, c));
  }
}

TEST_CASE("refinement keeps the token plus the re-selected frames") {
  const EncoderConfig cfg = tiny_cfg();
  Rng rng(22);
  const BlockParams p = init_block_params(cfg, rng);
  Tensor cls = random_tensor({cfg.embed_dim}, rng);
  const Tensor refined = refine_block(cls, fake_selection({0, 2}, 5.0), p, cfg);
  CHECK(refined.dim(0) == 3);
  CHECK(refined.dim(1) == cfg.embed_dim);
}

TEST_CASE("each stream's value projection feeds only the other stream") {
  Rng rng(23);
  DualAttentionParams p = init_dual_attention(4, rng);
  Tensor fc = random_tensor({3, 4}, rng);
  Tensor fr = random_tensor({3, 4}, rng);

  // Kill the refined stream's values: the cross output reduces to its
  // residual input while the refined output still moves.
  DualAttentionParams p2 = p;
  zero_out(p2.refined.wv);
  const DualAttentionResult res = dual_cross_attention(fc, fr, p2);
  for (std::size_t i = 0; i < fc.size(); ++i)
    CHECK(res.h_cross.at(i) == fc.at(i));
  bool moved = false;
  for (std::size_t i = 0; i < fr.size(); ++i)
    moved = moved || res.h_refined.at(i) != fr.at(i);
  CHECK(moved);
}

TEST_CASE("the dual attention is symmetric under swapping streams and roles") {
  Rng rng(24);
  const DualAttentionParams p = init_dual_attention(4, rng);
  Tensor fc = random_tensor({3, 4}, rng);
  Tensor fr = random_tensor({3, 4}, rng);

  const DualAttentionResult fwd = dual_cross_attention(fc, fr, p);
  const DualAttentionParams swapped{p.refined, p.cross};
  const DualAttentionResult rev = dual_cross_attention(fr, fc, swapped);

  for (std::size_t i = 0; i < fc.size(); ++i) {
    CHECK(fwd.h_cross.at(i) == rev.h_refined.at(i));
    CHECK(fwd.h_refined.at(i) == rev.h_cross.at(i));
  }
}

TEST_CASE("dual attention maps are row-stochastic") {
  Rng rng(25);
  const DualAttentionParams p = init_dual_attention(4, rng);
  Tensor fc = random_tensor({3, 4}, rng);
  Tensor fr = random_tensor({3, 4}, rng);
  const DualAttentionResult res = dual_cross_attention(fc, fr, p);
  for (const Tensor& attn : {res.attn_cross, res.attn_refined}) {
    REQUIRE(attn.dim(0) == 3);
    REQUIRE(attn.dim(1) == 3);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 3; ++c) total += attn.at(r, c);
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  Tensor bad = random_tensor({2, 4}, rng);
  CHECK_THROWS_AS(dual_cross_attention(fc, bad, p), DimensionError);
}

TEST_CASE("fusion with a zeroed output projection is the identity on row 0") {
  Rng rng(26);
  DaffParams p = init_daff(4, 2, rng);
  zero_out(p.w2);
  zero_out(p.b2);
  Tensor hc = random_tensor({3, 4}, rng);
  Tensor hr = random_tensor({3, 4}, rng);
  const Tensor out = daff_fuse(hc, hr, p);
  REQUIRE(out.rank() == 1);
  REQUIRE(out.dim(0) == 4);
  for (std::size_t c = 0; c < 4; ++c) CHECK(out.at(c) == hc.at(0, c));
}

TEST_CASE("the enriched token depends only on the cross token row") {
  // Row 0 takes the identity path around the convolution, so editing any
  // frame row or the refined stream must leave the output bit-identical.
  Rng rng(27);
  const DaffParams p = init_daff(4, 2, rng);
  Tensor hc = random_tensor({4, 4}, rng);
  Tensor hr = random_tensor({4, 4}, rng);
  const Tensor base = daff_fuse(hc, hr, p);

  Tensor hc2(hc.shape(), hc.values());
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 4; ++c) hc2.at(r, c) += 0.5;
  Tensor hr2 = random_tensor({4, 4}, rng);
  const Tensor shifted = daff_fuse(hc2, hr2, p);
  for (std::size_t c = 0; c < 4; ++c) CHECK(shifted.at(c) == base.at(c));

  Tensor hc3(hc.shape(), hc.values());
  hc3.at(0, 2) += 1.0;
  const Tensor moved = daff_fuse(hc3, hr, p);
  bool differs = false;
  for (std::size_t c = 0; c < 4; ++c)
    differs = differs || moved.at(c) != base.at(c);
  CHECK(differs);
}

TEST_CASE("fusion rejects degenerate shapes") {
  Rng rng(28);
  const DaffParams p = init_daff(4, 2, rng);
  Tensor one_row = random_tensor({1, 4}, rng);
  CHECK_THROWS_AS(daff_fuse(one_row, one_row, p), DimensionError);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({2, 4}, rng);
  CHECK_THROWS_AS(daff_fuse(a, b, p), DimensionError);
}

TEST_CASE("refinement-head gradients match finite differences") {
  Rng rng(29);
  const DualAttentionParams attn = init_dual_attention(4, rng);
  const DaffParams daff = init_daff(4, 2, rng);
  Tensor fc = random_tensor({3, 4}, rng);
  Tensor fr = random_tensor({3, 4}, rng);
  Tensor w = random_tensor({4}, rng);

  auto forward = [&]() {
    const DualAttentionResult res = dual_cross_attention(fc, fr, attn);
    return sum(mul(daff_fuse(res.h_cross, res.h_refined, daff), w));
  };
  const double err = max_grad_error(
      forward, {fc, fr, attn.cross.wq, attn.refined.wk, attn.cross.wv,
                daff.w1, daff.conv_kernel, daff.w2, daff.ln.gamma});
  CHECK(err < 1e-5);
}

TEST_CASE("parameter enumeration order is stable") {
  Rng rng(30);
  const ClrParams p = init_clr_params(tiny_cfg(), rng);
  std::vector<Tensor> out;
  p.collect(out);
  // two streams of six projections, then the eight fusion tensors
  REQUIRE(out.size() == 20);
  CHECK(out[0].data() == p.attention.cross.wq.data());
  CHECK(out[6].data() == p.attention.refined.wq.data());
  CHECK(out[12].data() == p.daff.ln.gamma.data());
  CHECK(out[19].data() == p.daff.b2.data());
}
