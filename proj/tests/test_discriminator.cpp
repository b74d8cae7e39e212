#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ccm/discriminator.hpp"
#include "ccm/rng.hpp"
#include "ccm/tensor.hpp"
#include "gradcheck.hpp"

using ccm::DiscriminatorVars;
using ccm::Shape;
using ccm::Tensor;
using ccm::Variant;
using ccm::ad::Tape;
using ccm::ad::Var;

namespace {

constexpr int kVa = 4;
constexpr int kAnsEmb = 6;
constexpr int kLa = 4;
constexpr int kVe = 7;
constexpr int kEmbD = 4;
constexpr int kHd = 5;
constexpr int kJoint = 6;

Tensor uniform_tensor(ccm::Rng& rng, Shape shape, double half_range) {
  Tensor t(shape, 0.0);
  for (auto& v : t.values) v = (rng.uniform_real() * 2.0 - 1.0) * half_range;
  return t;
}

std::vector<Tensor> disc_leaves(ccm::Rng& rng) {
  return {uniform_tensor(rng, {kAnsEmb, kVa}, 0.5),
          uniform_tensor(rng, {kLa, kAnsEmb}, 0.5),
          uniform_tensor(rng, {kVe, kEmbD}, 0.5),
          uniform_tensor(rng, {4 * kHd, kEmbD + kHd}, 0.4),
          uniform_tensor(rng, {4 * kHd}, 0.2),
          uniform_tensor(rng, {kLa, kLa}, 0.5),
          uniform_tensor(rng, {kLa}, 0.5),
          uniform_tensor(rng, {1}, 0.3),
          uniform_tensor(rng, {kHd, kHd}, 0.5),
          uniform_tensor(rng, {kHd}, 0.5),
          uniform_tensor(rng, {1}, 0.3),
          uniform_tensor(rng, {kLa, kLa}, 0.5),
          uniform_tensor(rng, {kHd, kHd}, 0.5),
          uniform_tensor(rng, {kJoint, kLa + kHd}, 0.5),
          uniform_tensor(rng, {kJoint}, 0.5),
          uniform_tensor(rng, {1}, 0.3)};
}

DiscriminatorVars disc_vars(std::span<const Var> v) {
  DiscriminatorVars p;
  p.ans_emb = v[0];
  p.ans_fc = v[1];
  p.exp_emb = v[2];
  p.exp_lstm_w = v[3];
  p.exp_lstm_b = v[4];
  p.ans_head_proj = v[5];
  p.ans_head_score = v[6];
  p.ans_head_bias = v[7];
  p.exp_head_proj = v[8];
  p.exp_head_score = v[9];
  p.exp_head_bias = v[10];
  p.joint_ans_proj = v[11];
  p.joint_exp_proj = v[12];
  p.joint_fc = v[13];
  p.joint_score = v[14];
  p.joint_bias = v[15];
  return p;
}

struct Fixture {
  Tape tape;
  std::vector<Tensor> leaves;
  std::vector<Var> vars;
  DiscriminatorVars p;

  explicit Fixture(uint64_t seed) {
    ccm::Rng rng(seed);
    leaves = disc_leaves(rng);
    for (const auto& t : leaves) vars.push_back(tape.leaf(t));
    p = disc_vars(vars);
  }
};

}  // namespace

TEST_CASE("variant names round-trip and bad names are itemized") {
  for (Variant v : {Variant::kBaseline, Variant::kCam, Variant::kCem,
                    Variant::kAecm, Variant::kCcm})
    CHECK(ccm::parse_variant(ccm::variant_name(v)) == v);
  CHECK_THROWS_WITH_AS(ccm::parse_variant("gan"), doctest::Contains("aecm"),
                       std::invalid_argument);
}

TEST_CASE("real answer embedding shape, zeros and separation") {
  Fixture f(31);
  Var g_da = ccm::embed_real_answer(f.tape, 2, f.p);
  CHECK(g_da.shape() == Shape{kLa});
  CHECK_THROWS_AS(ccm::embed_real_answer(f.tape, kVa, f.p), std::out_of_range);
  CHECK_THROWS_AS(ccm::embed_real_answer(f.tape, -1, f.p), std::out_of_range);

  Tape zero_tape;
  std::vector<double> ze(kAnsEmb * kVa, 0.0), zf(kLa * kAnsEmb, 0.0);
  DiscriminatorVars zp;
  zp.ans_emb = zero_tape.leaf({kAnsEmb, kVa}, ze);
  zp.ans_fc = zero_tape.leaf({kLa, kAnsEmb}, zf);
  for (double v : ccm::embed_real_answer(zero_tape, 1, zp).values())
    CHECK(v == 0.0);

  for (uint64_t seed = 50; seed < 60; ++seed) {
    Fixture g(seed);
    const auto a = ccm::embed_real_answer(g.tape, 0, g.p).values();
    const auto b = ccm::embed_real_answer(g.tape, 3, g.p).values();
    CHECK_FALSE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST_CASE("real explanation embedding shape, zeros and order sensitivity") {
  Fixture f(32);
  const std::vector<int> tokens{3, 1, 4, 2};
  Var g_de = ccm::embed_real_explanation(f.tape, tokens, f.p);
  CHECK(g_de.shape() == Shape{kHd});
  CHECK_THROWS_AS(ccm::embed_real_explanation(f.tape, std::vector<int>{kVe}, f.p),
                  std::out_of_range);
  CHECK_THROWS_AS(ccm::embed_real_explanation(f.tape, std::vector<int>{}, f.p),
                  std::invalid_argument);

  Fixture z(33);
  std::fill(z.leaves[3].values.begin(), z.leaves[3].values.end(), 0.0);
  std::fill(z.leaves[4].values.begin(), z.leaves[4].values.end(), 0.0);
  Tape zt;
  std::vector<Var> zv;
  for (const auto& t : z.leaves) zv.push_back(zt.leaf(t));
  for (double v : ccm::embed_real_explanation(zt, tokens, disc_vars(zv)).values())
    CHECK(v == 0.0);

  for (uint64_t seed = 70; seed < 80; ++seed) {
    Fixture g(seed);
    std::vector<int> reversed(tokens.rbegin(), tokens.rend());
    const auto fwd = ccm::embed_real_explanation(g.tape, tokens, g.p).values();
    const auto bwd = ccm::embed_real_explanation(g.tape, reversed, g.p).values();
    CHECK_FALSE(std::equal(fwd.begin(), fwd.end(), bwd.begin()));
  }
}

TEST_CASE("joint embedding zero inputs, bounds and mismatches") {
  Fixture f(34);
  Var zero_a = f.tape.leaf({kLa}, std::vector<double>(kLa, 0.0));
  Var zero_e = f.tape.leaf({kHd}, std::vector<double>(kHd, 0.0));
  Var g_dj = ccm::joint_embed(f.tape, zero_a, zero_e, f.p);
  REQUIRE(g_dj.shape() == Shape{kJoint});
  for (double v : g_dj.values()) CHECK(v == 0.0);

  ccm::Rng rng(35);
  Var g_da = f.tape.leaf(uniform_tensor(rng, {kLa}, 2.0));
  Var g_de = f.tape.leaf(uniform_tensor(rng, {kHd}, 2.0));
  const auto out = ccm::joint_embed(f.tape, g_da, g_de, f.p).values();
  const auto& jfc = f.leaves[13];
  for (int r = 0; r < kJoint; ++r) {
    double l1 = 0.0;
    for (int c = 0; c < kLa + kHd; ++c)
      l1 += std::fabs(jfc.values[static_cast<std::size_t>(r * (kLa + kHd) + c)]);
    CHECK(std::fabs(out[static_cast<std::size_t>(r)]) <= l1 + 1e-12);
  }

  Var wrong = f.tape.leaf({kLa + 1}, std::vector<double>(kLa + 1, 0.1));
  CHECK_THROWS_AS(ccm::joint_embed(f.tape, wrong, g_de, f.p), std::invalid_argument);
}

TEST_CASE("joint embedding gradients match finite differences") {
  ccm::Rng rng(36);
  auto leaves = disc_leaves(rng);
  leaves.push_back(uniform_tensor(rng, {kLa}, 0.8));
  leaves.push_back(uniform_tensor(rng, {kHd}, 0.8));
  const auto res = gradcheck::check(
      leaves,
      [](Tape& t, std::span<const Var> v) {
        return t.sum(ccm::joint_embed(t, v[16], v[17], disc_vars(v)));
      });
  CHECK(res.checked > 80);
  CHECK(res.max_rel_err <= 1e-4);
}

TEST_CASE("zero scoring weights give probability one half") {
  ccm::Rng rng(37);
  auto leaves = disc_leaves(rng);
  for (std::size_t i : {6, 7, 9, 10, 14, 15})
    std::fill(leaves[i].values.begin(), leaves[i].values.end(), 0.0);
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : leaves) vars.push_back(tape.leaf(t));
  const auto p = disc_vars(vars);
  Var g_da = tape.leaf(uniform_tensor(rng, {kLa}, 1.0));
  Var g_de = tape.leaf(uniform_tensor(rng, {kHd}, 1.0));

  for (Variant v : {Variant::kCam, Variant::kCem, Variant::kAecm, Variant::kCcm}) {
    const auto probs = ccm::discriminate(tape, v, g_da, g_de, p);
    REQUIRE(probs.size() == (v == Variant::kAecm ? 2u : 1u));
    for (const auto& prob : probs)
      CHECK(prob.scalar() == doctest::Approx(0.5).epsilon(1e-12));
  }
}

TEST_CASE("discriminator probabilities stay strictly inside the unit interval") {
  for (uint64_t seed = 90; seed < 100; ++seed) {
    Fixture f(seed);
    ccm::Rng rng(seed + 1000);
    Var g_da = f.tape.leaf(uniform_tensor(rng, {kLa}, 3.0));
    Var g_de = f.tape.leaf(uniform_tensor(rng, {kHd}, 3.0));
    for (Variant v : {Variant::kCam, Variant::kCem, Variant::kAecm, Variant::kCcm})
      for (const auto& prob : ccm::discriminate(f.tape, v, g_da, g_de, f.p)) {
        CHECK(prob.scalar() > 0.0);
        CHECK(prob.scalar() < 1.0);
      }
  }
}

TEST_CASE("joint score is sensitive to each side") {
  for (uint64_t seed = 110; seed < 120; ++seed) {
    Fixture f(seed);
    ccm::Rng rng(seed + 2000);
    Var g_da = f.tape.leaf(uniform_tensor(rng, {kLa}, 1.0));
    Var g_de = f.tape.leaf(uniform_tensor(rng, {kHd}, 1.0));
    Var g_da2 = f.tape.leaf(uniform_tensor(rng, {kLa}, 1.0));
    Var g_de2 = f.tape.leaf(uniform_tensor(rng, {kHd}, 1.0));
    const double base =
        ccm::discriminate(f.tape, Variant::kCcm, g_da, g_de, f.p)[0].scalar();
    const double ans_moved =
        ccm::discriminate(f.tape, Variant::kCcm, g_da2, g_de, f.p)[0].scalar();
    const double exp_moved =
        ccm::discriminate(f.tape, Variant::kCcm, g_da, g_de2, f.p)[0].scalar();
    CHECK(base != ans_moved);
    CHECK(base != exp_moved);
  }
}

TEST_CASE("variants demand their sides and baseline has none") {
  Fixture f(38);
  ccm::Rng rng(39);
  Var g_da = f.tape.leaf(uniform_tensor(rng, {kLa}, 1.0));
  Var g_de = f.tape.leaf(uniform_tensor(rng, {kHd}, 1.0));
  Var none;

  CHECK_THROWS_WITH_AS(ccm::discriminate(f.tape, Variant::kBaseline, g_da, g_de, f.p),
                       doctest::Contains("baseline"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(ccm::discriminate(f.tape, Variant::kCam, none, g_de, f.p),
                       doctest::Contains("answer"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(ccm::discriminate(f.tape, Variant::kCem, g_da, none, f.p),
                       doctest::Contains("explanation"), std::invalid_argument);
  CHECK_THROWS_AS(ccm::discriminate(f.tape, Variant::kAecm, g_da, none, f.p),
                  std::invalid_argument);
  CHECK_THROWS_AS(ccm::discriminate(f.tape, Variant::kCcm, none, g_de, f.p),
                  std::invalid_argument);
}

TEST_CASE("adversarial loss anchors") {
  Tape tape;
  auto prob = [&](double v) { return tape.scalar_leaf(v); };

  const std::vector<Var> half{prob(0.5)};
  const auto balanced = ccm::adversarial_losses(tape, half, half);
  CHECK(balanced.l_c.scalar() == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(balanced.generator_term.scalar() ==
        doctest::Approx(std::log(0.5)).epsilon(1e-12));

  const std::vector<Var> sharp_real{prob(1.0 - 1e-9)};
  const std::vector<Var> sharp_fake{prob(1e-9)};
  const auto optimal = ccm::adversarial_losses(tape, sharp_real, sharp_fake);
  CHECK(optimal.l_c.scalar() < 0.0);
  CHECK(optimal.l_c.scalar() > -1e-5);

  const std::vector<Var> extremes{prob(0.0), prob(1.0)};
  const auto clamped = ccm::adversarial_losses(tape, extremes, extremes);
  CHECK(std::isfinite(clamped.l_c.scalar()));
  CHECK(std::isfinite(clamped.generator_term.scalar()));

  const std::vector<Var> fake{prob(0.25)};
  const auto nonsat = ccm::adversarial_losses(tape, half, fake, true);
  CHECK(nonsat.generator_term.scalar() ==
        doctest::Approx(-std::log(0.25)).epsilon(1e-12));
  CHECK(nonsat.l_c.scalar() ==
        doctest::Approx(std::log(0.5) + std::log(0.75)).epsilon(1e-12));

  CHECK_THROWS_AS(ccm::adversarial_losses(tape, {}, fake), std::invalid_argument);
}

TEST_CASE("total loss composition") {
  Tape tape;
  Var l_y = tape.scalar_leaf(1.0);
  Var l_e = tape.scalar_leaf(2.0);
  Var l_c = tape.scalar_leaf(-1.0);
  CHECK(ccm::total_loss(tape, l_y, l_e, l_c, 0.5).scalar() ==
        doctest::Approx(3.5).epsilon(1e-12));
  CHECK(ccm::total_loss(tape, l_y, l_e, l_c, 0.0).scalar() ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("adversarial loss gradients reach the scoring parameters") {
  ccm::Rng rng(41);
  auto leaves = disc_leaves(rng);
  leaves.push_back(uniform_tensor(rng, {kLa}, 0.8));   // fake answer feature
  leaves.push_back(uniform_tensor(rng, {kHd}, 0.8));   // fake explanation feature
  const auto res = gradcheck::check(
      leaves,
      [](Tape& t, std::span<const Var> v) {
        const auto p = disc_vars(v);
        Var real_a = ccm::embed_real_answer(t, 1, p);
        Var real_e = ccm::embed_real_explanation(t, std::vector<int>{2, 5, 3}, p);
        const auto real = ccm::discriminate(t, Variant::kCcm, real_a, real_e, p);
        const auto fake = ccm::discriminate(t, Variant::kCcm, v[16], v[17], p);
        return ccm::adversarial_losses(t, real, fake).l_c;
      });
  CHECK(res.checked > 300);
  CHECK(res.max_rel_err <= 1e-4);
}
