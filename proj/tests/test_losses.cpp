#include "doctest.h"

#include <array>
#include <cmath>

#include "gradcheck.hpp"
#include "pc2dae/losses.hpp"

using namespace pc2dae;
using namespace pc2dae::ad;
using testutil::max_grad_rel_error;
using testutil::random_tensor;

namespace {

std::array<Tensor, kNumFamilies> family_like(const Tensor& bc,
                                             const Tensor& gas,
                                             const Tensor& co2) {
  return {bc, gas, co2};
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("per-variant weights") {
  const LossWeights lean = LossWeights::for_variant(Variant::Lean);
  const LossWeights wide = LossWeights::for_variant(Variant::Wide);
  const LossWeights abl =
      LossWeights::for_variant(Variant::UnconstrainedAblation);
  for (int g = 0; g < kNumFamilies; ++g) {
    CHECK(lean.lambda_positivity[g] == 0.1);
    CHECK(lean.lambda_smooth[g] == 0.01);
    CHECK(wide.lambda_positivity[g] == 0.01);
    CHECK(wide.lambda_smooth[g] == 0.005);
    CHECK(abl.lambda_positivity[g] == 0.0);
    CHECK(abl.lambda_smooth[g] == 0.0);
  }
}

TEST_CASE("reconstruction loss is zero at the target") {
  Tensor pred = random_tensor({2, 4, 16}, 1, false);
  Tensor w = Tensor::full({2, 4, 16}, 1.0);
  CHECK(recon_loss(pred, pred, w).item() == 0.0);
}

TEST_CASE("a uniform off-by-one error costs exactly one") {
  Tensor target = random_tensor({2, 4, 16}, 2, false);
  Tensor pred = add(target, Tensor::full({2, 4, 16}, 1.0));
  Tensor w = Tensor::full({2, 4, 16}, 1.0);
  CHECK(recon_loss(pred, target, w).item() ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked entries neither contribute nor dilute") {
  // Half the entries hold an error of 3 but carry zero weight; the other
  // half are exact. The masked mean must be exactly zero.
  Tensor target = random_tensor({1, 2, 8}, 3, false);
  Array pv = target.values();
  Array wv = Array::Ones(16);
  for (Index i = 0; i < 16; i += 2) {
    pv(i) += 3.0;
    wv(i) = 0.0;
  }
  Tensor pred = Tensor::from_array({1, 2, 8}, pv);
  Tensor w = Tensor::from_array({1, 2, 8}, wv);
  CHECK(recon_loss(pred, target, w).item() == 0.0);

  // Conversely the same errors with full weights average to 1.5.
  Tensor w1 = Tensor::full({1, 2, 8}, 1.0);
  CHECK(recon_loss(pred, target, w1).item() ==
        doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("an all-masked family contributes zero and is flagged") {
  Tensor pred = random_tensor({1, 2, 8}, 4, false);
  Tensor target = random_tensor({1, 2, 8}, 5, false);
  Tensor w = Tensor::zeros({1, 2, 8});
  bool empty = false;
  CHECK(recon_loss(pred, target, w, &empty).item() == 0.0);
  CHECK(empty);
}

TEST_CASE("positivity penalty follows its closed form") {
  Tensor pos = Tensor::full({1, 3, 8}, 2.5);
  CHECK(positivity_loss(pos, 0.1).item() == 0.0);

  Tensor neg = Tensor::full({1, 3, 8}, -1.0);
  CHECK(positivity_loss(neg, 0.1).item() ==
        doctest::Approx(0.1).epsilon(1e-12));

  // Mixed signs: only the negative part is charged, averaged over all
  // elements. Half at -2 and half at +7 gives mean 1.
  Array v(8);
  v << -2, 7, -2, 7, -2, 7, -2, 7;
  Tensor mixed = Tensor::from_array({1, 1, 8}, v);
  CHECK(positivity_loss(mixed, 0.5).item() ==
        doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("smoothness penalty follows its closed form") {
  Tensor flat = Tensor::full({2, 3, 16}, 4.2);
  CHECK(smooth_loss(flat, 0.01).item() == 0.0);

  Array alt(128);
  for (Index i = 0; i < 128; ++i) alt(i) = (i % 2 == 0) ? 1.0 : -1.0;
  Tensor zigzag = Tensor::from_array({1, 1, 128}, alt);
  CHECK(smooth_loss(zigzag, 0.01).item() ==
        doctest::Approx(0.01 * 2.0).epsilon(1e-12));

  // A single-step series needs at least two samples.
  CHECK_THROWS_AS(smooth_loss(Tensor::full({1, 1, 1}, 0.0), 0.01),
                  shape_error);
}

TEST_CASE("gradcheck: all three terms") {
  Tensor pred = random_tensor({2, 3, 10}, 6, true, 0.3);
  Tensor target = random_tensor({2, 3, 10}, 7, false);
  Array wv = Array::Ones(60);
  for (Index i = 0; i < 60; i += 7) wv(i) = 0.0;
  Tensor w = Tensor::from_array({2, 3, 10}, wv);

  CHECK(max_grad_rel_error([&] { return recon_loss(pred, target, w); },
                           {pred}) < 1e-5);
  CHECK(max_grad_rel_error([&] { return positivity_loss(pred, 0.1); },
                           {pred}) < 1e-5);
  CHECK(max_grad_rel_error([&] { return smooth_loss(pred, 0.01); }, {pred}) <
        1e-5);
}

TEST_CASE("total loss sums recon, positivity and smoothness per family") {
  Tensor bc_p = random_tensor({2, 4, 12}, 8, true, 0.3);
  Tensor gas_p = random_tensor({2, 9, 12}, 9, true, 0.3);
  Tensor co2_p = random_tensor({2, 2, 12}, 10, true, 0.3);
  Tensor bc_t = random_tensor({2, 4, 12}, 11, false);
  Tensor gas_t = random_tensor({2, 9, 12}, 12, false);
  Tensor co2_t = random_tensor({2, 2, 12}, 13, false);
  auto ones = [](Shape s) {
    return Tensor::full(std::move(s), 1.0);
  };
  const auto preds = family_like(bc_p, gas_p, co2_p);
  const auto targets = family_like(bc_t, gas_t, co2_t);
  const auto weights = family_like(ones({2, 4, 12}), ones({2, 9, 12}),
                                   ones({2, 2, 12}));

  const LossWeights lw = LossWeights::for_variant(Variant::Lean);
  TotalLoss tl = total_loss(preds, targets, weights, lw);

  double expect = 0.0;
  for (int g = 0; g < kNumFamilies; ++g) {
    expect += recon_loss(preds[g], targets[g], weights[g]).item();
    expect += positivity_loss(preds[g], lw.lambda_positivity[g]).item();
    expect += smooth_loss(preds[g], lw.lambda_smooth[g]).item();
    CHECK(tl.report.recon[g] >= 0.0);
    CHECK(tl.report.positivity[g] >= 0.0);
    CHECK(tl.report.smooth[g] >= 0.0);
  }
  CHECK(tl.value.item() == doctest::Approx(expect).epsilon(1e-12));
  CHECK(tl.report.total == doctest::Approx(tl.value.item()).epsilon(1e-12));
  CHECK(std::abs(tl.report.total -
                 (tl.report.recon_sum() + tl.report.positivity_sum() +
                  tl.report.smooth_sum())) < 1e-12);
  CHECK(tl.value.requires_grad());
}

TEST_CASE("ablation weights reduce the total to reconstruction only") {
  Tensor bc_p = random_tensor({1, 4, 10}, 14, false);
  Tensor gas_p = random_tensor({1, 9, 10}, 15, false);
  Tensor co2_p = random_tensor({1, 2, 10}, 16, false);
  Tensor bc_t = random_tensor({1, 4, 10}, 17, false);
  Tensor gas_t = random_tensor({1, 9, 10}, 18, false);
  Tensor co2_t = random_tensor({1, 2, 10}, 19, false);
  const auto preds = family_like(bc_p, gas_p, co2_p);
  const auto targets = family_like(bc_t, gas_t, co2_t);
  const auto weights = family_like(Tensor::full({1, 4, 10}, 1.0),
                                   Tensor::full({1, 9, 10}, 1.0),
                                   Tensor::full({1, 2, 10}, 1.0));

  TotalLoss tl =
      total_loss(preds, targets, weights,
                 LossWeights::for_variant(Variant::UnconstrainedAblation));
  CHECK(tl.report.positivity_sum() == 0.0);
  CHECK(tl.report.smooth_sum() == 0.0);
  CHECK(tl.report.total ==
        doctest::Approx(tl.report.recon_sum()).epsilon(1e-12));
}

TEST_CASE("positive predictions leave only recon and smoothness") {
  Tensor pred = Tensor::from_array(
      {1, 2, 6}, (Array(12) << 1, 2, 3, 4, 5, 6, 6, 5, 4, 3, 2, 1).finished());
  const auto preds = family_like(pred, Tensor::full({1, 9, 6}, 1.0),
                                 Tensor::full({1, 2, 6}, 1.0));
  const auto targets = family_like(Tensor::full({1, 2, 6}, 2.0),
                                   Tensor::full({1, 9, 6}, 1.0),
                                   Tensor::full({1, 2, 6}, 1.0));
  const auto weights = family_like(Tensor::full({1, 2, 6}, 1.0),
                                   Tensor::full({1, 9, 6}, 1.0),
                                   Tensor::full({1, 2, 6}, 1.0));
  TotalLoss tl = total_loss(preds, targets, weights,
                            LossWeights::for_variant(Variant::Lean));
  CHECK(tl.report.positivity_sum() == 0.0);
  CHECK(tl.report.total == doctest::Approx(tl.report.recon_sum() +
                                           tl.report.smooth_sum())
                               .epsilon(1e-12));
}

TEST_CASE("total loss is invariant to batch permutation") {
  // Two windows per family, evaluated in both batch orders.
  auto swap_batch = [](const Tensor& t) {
    const Index C = t.dim(1), T = t.dim(2);
    Array v(t.size());
    v.segment(0, C * T) = t.values().segment(C * T, C * T);
    v.segment(C * T, C * T) = t.values().segment(0, C * T);
    return Tensor::from_array({2, C, T}, std::move(v));
  };

  std::array<Tensor, kNumFamilies> preds, targets, weights;
  const std::array<Index, kNumFamilies> widths = {4, 9, 2};
  for (int g = 0; g < kNumFamilies; ++g) {
    preds[g] = random_tensor({2, widths[g], 8}, 20 + g, false);
    targets[g] = random_tensor({2, widths[g], 8}, 30 + g, false);
    Array wv = Array::Ones(2 * widths[g] * 8);
    for (Index i = 0; i < wv.size(); i += 3) wv(i) = 0.0;
    weights[g] = Tensor::from_array({2, widths[g], 8}, std::move(wv));
  }
  std::array<Tensor, kNumFamilies> preds2, targets2, weights2;
  for (int g = 0; g < kNumFamilies; ++g) {
    preds2[g] = swap_batch(preds[g]);
    targets2[g] = swap_batch(targets[g]);
    weights2[g] = swap_batch(weights[g]);
  }

  const LossWeights lw = LossWeights::for_variant(Variant::Lean);
  const double a = total_loss(preds, targets, weights, lw).value.item();
  const double b = total_loss(preds2, targets2, weights2, lw).value.item();
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("split_families slices the canonical channel layout") {
  Tensor x = random_tensor({2, kNumChannels, 8}, 40, true);
  const auto parts = split_families(x);
  CHECK(parts[0].shape() == Shape({2, 4, 8}));
  CHECK(parts[1].shape() == Shape({2, 9, 8}));
  CHECK(parts[2].shape() == Shape({2, 2, 8}));
  // Channel 4 is the first gas channel; batch 1, time 3.
  const Index src = (1 * kNumChannels + 4) * 8 + 3;
  const Index dst = (1 * 9 + 0) * 8 + 3;
  CHECK(parts[1].values()(dst) == x.values()(src));
  // Splits are constants even when the source tracks gradients.
  CHECK_FALSE(parts[0].requires_grad());
}

}  // TEST_SUITE("losses")
