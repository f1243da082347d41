#ifndef BCOPS_KDE_H_
#define BCOPS_KDE_H_

#include <optional>
#include <span>
#include <vector>

#include "bcops/matrix.h"
#include "json.hpp"

namespace bcops {

inline constexpr double kMinBandwidth = 1e-6;

// 0.9 * min(SD, IQR / 1.34) * n^(-1/5), floored at kMinBandwidth. Falls back
// to the SD when the IQR is zero. Throws InputError for fewer than 2 values
// or zero spread.
double SilvermanBandwidth(std::span<const double> values);

// Gaussian kernel density estimate on the real line.
class KernelDensity1D {
 public:
  static KernelDensity1D Fit(std::vector<double> values,
                             std::optional<double> bandwidth = std::nullopt);

  double Density(double t) const;
  double bandwidth() const { return bandwidth_; }
  const std::vector<double>& values() const { return values_; }

  nlohmann::json ToJson() const;

 private:
  std::vector<double> values_;
  double bandwidth_ = 1.0;
};

// Product-Gaussian kernel density estimate with one bandwidth per dimension.
class KernelDensity {
 public:
  // Bandwidths default to the per-dimension Silverman rule.
  static KernelDensity Fit(const Matrix& samples,
                           std::optional<std::vector<double>> bandwidths = std::nullopt);

  double Density(std::span<const double> x) const;
  // Computed with log-sum-exp; finite wherever Density underflows.
  double LogDensity(std::span<const double> x) const;

  const std::vector<double>& bandwidths() const { return bandwidths_; }
  const Matrix& samples() const { return samples_; }
  std::size_t dimension() const { return samples_.cols(); }

  nlohmann::json ToJson() const;
  static KernelDensity FromJson(const nlohmann::json& j);

 private:
  Matrix samples_;
  std::vector<double> bandwidths_;
};

}  // namespace bcops

#endif  // BCOPS_KDE_H_
