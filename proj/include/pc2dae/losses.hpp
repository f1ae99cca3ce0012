#pragma once

#include <array>

#include "pc2dae/model.hpp"
#include "pc2dae/ops.hpp"
#include "pc2dae/series.hpp"

namespace pc2dae {

struct LossWeights {
  std::array<double, kNumFamilies> lambda_positivity{0.1, 0.1, 0.1};
  std::array<double, kNumFamilies> lambda_smooth{0.01, 0.01, 0.01};

  static LossWeights for_variant(Variant v);
};

struct LossReport {
  std::array<double, kNumFamilies> recon{};
  std::array<double, kNumFamilies> positivity{};
  std::array<double, kNumFamilies> smooth{};
  double total = 0.0;
  // Families whose weights were all zero in this batch; they contribute 0.
  std::array<bool, kNumFamilies> empty_family{};

  double recon_sum() const;
  double positivity_sum() const;
  double smooth_sum() const;
};

// Masked mean absolute error: sum(w * |pred - target|) / sum(w). A zero
// weight sum yields a constant 0 and sets *empty when provided.
ad::Tensor recon_loss(const ad::Tensor& pred, const ad::Tensor& target,
                      const ad::Tensor& weights, bool* empty = nullptr);

// lambda1 * mean(max(0, -pred)) over every element.
ad::Tensor positivity_loss(const ad::Tensor& pred, double lambda1);

// lambda2 * mean(|pred_{t+1} - pred_t|) over batch, channels and steps.
ad::Tensor smooth_loss(const ad::Tensor& pred, double lambda2);

struct TotalLoss {
  ad::Tensor value;  // differentiable scalar, equal to report.total
  LossReport report;
};

// Per-family recon + positivity + smoothness, summed over families.
TotalLoss total_loss(const std::array<ad::Tensor, kNumFamilies>& preds,
                     const std::array<ad::Tensor, kNumFamilies>& targets,
                     const std::array<ad::Tensor, kNumFamilies>& weights,
                     const LossWeights& lw);

// Splits a [B,15,T] tensor into per-family [B,|C_g|,T] constants. No
// gradient tracking; intended for targets and weights.
std::array<ad::Tensor, kNumFamilies> split_families(const ad::Tensor& x);

}  // namespace pc2dae
