#include "pc2dae/losses.hpp"

#include <iostream>
#include <numeric>

namespace pc2dae {

using ad::Array;
using ad::Index;
using ad::Tensor;

LossWeights LossWeights::for_variant(Variant v) {
  LossWeights w;
  switch (v) {
    case Variant::Lean:
      w.lambda_positivity.fill(0.1);
      w.lambda_smooth.fill(0.01);
      break;
    case Variant::Wide:
      w.lambda_positivity.fill(0.01);
      w.lambda_smooth.fill(0.005);
      break;
    case Variant::UnconstrainedAblation:
      w.lambda_positivity.fill(0.0);
      w.lambda_smooth.fill(0.0);
      break;
  }
  return w;
}

double LossReport::recon_sum() const {
  return std::accumulate(recon.begin(), recon.end(), 0.0);
}

double LossReport::positivity_sum() const {
  return std::accumulate(positivity.begin(), positivity.end(), 0.0);
}

double LossReport::smooth_sum() const {
  return std::accumulate(smooth.begin(), smooth.end(), 0.0);
}

Tensor recon_loss(const Tensor& pred, const Tensor& target,
                  const Tensor& weights, bool* empty) {
  if (pred.shape() != target.shape() || pred.shape() != weights.shape()) {
    throw shape_error("recon_loss: pred " + ad::shape_str(pred.shape()) +
                      ", target " + ad::shape_str(target.shape()) +
                      ", weights " + ad::shape_str(weights.shape()) +
                      " must match");
  }
  const double weight_sum = weights.values().sum();
  if (empty != nullptr) *empty = weight_sum == 0.0;
  if (weight_sum == 0.0) return Tensor::scalar(0.0);
  Tensor masked = ad::mul(ad::abs(ad::sub(pred, target)), weights);
  return ad::scale(ad::sum(masked), 1.0 / weight_sum);
}

Tensor positivity_loss(const Tensor& pred, double lambda1) {
  return ad::scale(ad::mean(ad::relu(ad::scale(pred, -1.0))), lambda1);
}

Tensor smooth_loss(const Tensor& pred, double lambda2) {
  if (pred.ndim() != 3 || pred.dim(2) < 2) {
    throw shape_error("smooth_loss: need [B,C,T] with T >= 2, got " +
                      ad::shape_str(pred.shape()));
  }
  return ad::scale(ad::mean(ad::abs(ad::time_diff(pred))), lambda2);
}

TotalLoss total_loss(const std::array<Tensor, kNumFamilies>& preds,
                     const std::array<Tensor, kNumFamilies>& targets,
                     const std::array<Tensor, kNumFamilies>& weights,
                     const LossWeights& lw) {
  TotalLoss out;
  Tensor acc;
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto fi = static_cast<size_t>(f);
    bool empty = false;
    Tensor r = recon_loss(preds[fi], targets[fi], weights[fi], &empty);
    Tensor p = positivity_loss(preds[fi], lw.lambda_positivity[fi]);
    Tensor s = smooth_loss(preds[fi], lw.lambda_smooth[fi]);
    out.report.recon[fi] = r.item();
    out.report.positivity[fi] = p.item();
    out.report.smooth[fi] = s.item();
    out.report.empty_family[fi] = empty;
    if (empty) {
      std::cerr << "warning: family " << family_name(static_cast<Family>(f))
                << " has no weighted samples in this batch; reconstruction "
                   "term is 0\n";
    }
    Tensor term = ad::add(ad::add(r, p), s);
    acc = acc.defined() ? ad::add(acc, term) : term;
  }
  out.report.total = acc.item();
  out.value = acc;
  return out;
}

std::array<Tensor, kNumFamilies> split_families(const Tensor& x) {
  if (x.ndim() != 3 || x.dim(1) != kNumChannels) {
    throw shape_error("split_families: expected [B," +
                      std::to_string(kNumChannels) + ",T], got " +
                      ad::shape_str(x.shape()));
  }
  const Index B = x.dim(0);
  const Index T = x.dim(2);
  std::array<Tensor, kNumFamilies> out;
  for (int f = 0; f < kNumFamilies; ++f) {
    const auto span = family_span(static_cast<Family>(f));
    const Index nf = span.second - span.first;
    Array v(B * nf * T);
    for (Index b = 0; b < B; ++b) {
      v.segment(b * nf * T, nf * T) = x.values().segment(
          b * kNumChannels * T + span.first * T, nf * T);
    }
    out[static_cast<size_t>(f)] = Tensor::from_array({B, nf, T}, std::move(v));
  }
  return out;
}

}  // namespace pc2dae
