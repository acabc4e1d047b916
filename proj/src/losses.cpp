#include "neurotube/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neurotube/error.hpp"

namespace neurotube::losses {

double information_weight(double subvolume_sum, double full_volume_sum) {
  if (!(full_volume_sum > 0))
    throw ArgumentError("information_weight: full volume sum must be positive, got " +
                        std::to_string(full_volume_sum));
  return std::clamp(subvolume_sum / full_volume_sum, 0.0, 1.0);
}

double weighted_cross_entropy_value(std::span<const real> label, std::span<const real> probs,
                                    double weight) {
  if (label.size() != probs.size())
    throw ArgumentError("weighted_cross_entropy: label length " + std::to_string(label.size()) +
                        " != prediction length " + std::to_string(probs.size()));
  double ce = 0;
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] != 0) ce -= label[i] * std::log(std::max<double>(probs[i], kProbFloor));
  return weight * ce;
}

Tensor weighted_cross_entropy(std::span<const real> label, const Tensor& probs, double weight) {
  const double loss = weighted_cross_entropy_value(label, probs.data(), weight);
  std::vector<real> y(label.begin(), label.end());
  return detail::make_result(Shape{1}, {static_cast<real>(loss)}, {probs},
                             [y = std::move(y), weight](detail::Node& self) {
                               auto& dp = self.inputs[0]->ensure_grad();
                               const auto& p = self.inputs[0]->data;
                               for (std::size_t i = 0; i < y.size(); ++i)
                                 if (y[i] != 0 && p[i] > kProbFloor)
                                   dp[i] += static_cast<real>(-weight * y[i] / p[i] * self.grad[0]);
                             });
}

double binary_cross_entropy_value(std::span<const float> pred, std::span<const float> target) {
  if (pred.size() != target.size() || pred.empty())
    throw ArgumentError("binary_cross_entropy: prediction has " + std::to_string(pred.size()) +
                        " voxels, target has " + std::to_string(target.size()));
  double total = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp<double>(pred[i], kBceClamp, 1.0 - kBceClamp);
    const double t = target[i];
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return total / static_cast<double>(pred.size());
}

Tensor binary_cross_entropy(const Tensor& pred, std::span<const float> target) {
  if (pred.numel() != target.size())
    throw ArgumentError("binary_cross_entropy: prediction has " + std::to_string(pred.numel()) +
                        " voxels, target has " + std::to_string(target.size()));
  const auto pd = pred.data();
  double total = 0;
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const double p = std::clamp<double>(pd[i], kBceClamp, 1.0 - kBceClamp);
    const double t = target[i];
    total -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  const double n = static_cast<double>(pd.size());
  std::vector<float> t(target.begin(), target.end());
  return detail::make_result(
      Shape{1}, {static_cast<real>(total / n)}, {pred}, [t = std::move(t), n](detail::Node& self) {
        auto& dp = self.inputs[0]->ensure_grad();
        const auto& p = self.inputs[0]->data;
        const double g = self.grad[0] / n;
        for (std::size_t i = 0; i < t.size(); ++i) {
          const double pi = p[i];
          if (pi < kBceClamp || pi > 1.0 - kBceClamp) continue;
          dp[i] += static_cast<real>(g * (-t[i] / pi + (1.0 - t[i]) / (1.0 - pi)));
        }
      });
}

}  // namespace neurotube::losses
