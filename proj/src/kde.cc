#include "bcops/kde.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcops/errors.h"

namespace bcops {
namespace {

constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684758586311649;

// Linear-interpolated sample quantile (type 7) of sorted data.
double SortedQuantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

double SilvermanBandwidth(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw InputError("bandwidth rule needs at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) throw InputError("values have zero spread; supply a bandwidth");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double iqr = SortedQuantile(sorted, 0.75) - SortedQuantile(sorted, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return std::max(h, kMinBandwidth);
}

KernelDensity1D KernelDensity1D::Fit(std::vector<double> values, std::optional<double> bandwidth) {
  if (values.empty()) throw InputError("density estimate needs values");
  for (double v : values) {
    if (!std::isfinite(v)) throw InputError("density estimate given a non-finite value");
  }
  KernelDensity1D kde;
  if (bandwidth) {
    if (!(*bandwidth > 0.0) || !std::isfinite(*bandwidth)) {
      throw InputError("bandwidth must be positive");
    }
    kde.bandwidth_ = *bandwidth;
  } else {
    kde.bandwidth_ = SilvermanBandwidth(values);
  }
  kde.values_ = std::move(values);
  return kde;
}

double KernelDensity1D::Density(double t) const {
  double sum = 0.0;
  for (double v : values_) {
    const double u = (t - v) / bandwidth_;
    sum += kInvSqrt2Pi * std::exp(-0.5 * u * u) / bandwidth_;
  }
  return sum / static_cast<double>(values_.size());
}

nlohmann::json KernelDensity1D::ToJson() const {
  return {{"type", "kde_1d"}, {"bandwidth", bandwidth_}, {"values", values_}};
}

KernelDensity KernelDensity::Fit(const Matrix& samples, std::optional<std::vector<double>> bandwidths) {
  if (samples.rows() < 2 && !bandwidths) {
    throw InputError("density estimate needs at least 2 samples");
  }
  if (samples.rows() < 1) throw InputError("density estimate needs samples");
  for (double v : samples.data()) {
    if (!std::isfinite(v)) throw InputError("density estimate given a non-finite value");
  }
  KernelDensity kde;
  kde.samples_ = samples;
  if (bandwidths) {
    if (bandwidths->size() != samples.cols()) throw InputError("bandwidth count mismatch");
    for (double h : *bandwidths) {
      if (!(h > 0.0)) throw InputError("bandwidth must be positive");
    }
    kde.bandwidths_ = std::move(*bandwidths);
  } else {
    std::vector<double> column(samples.rows());
    for (std::size_t j = 0; j < samples.cols(); ++j) {
      for (std::size_t i = 0; i < samples.rows(); ++i) column[i] = samples(i, j);
      kde.bandwidths_.push_back(SilvermanBandwidth(column));
    }
  }
  return kde;
}

double KernelDensity::Density(std::span<const double> x) const {
  if (x.size() != dimension()) throw InputError("feature vector has wrong length");
  double sum = 0.0;
  for (std::size_t i = 0; i < samples_.rows(); ++i) {
    const auto s = samples_.row(i);
    double prod = 1.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double u = (x[j] - s[j]) / bandwidths_[j];
      prod *= kInvSqrt2Pi * std::exp(-0.5 * u * u) / bandwidths_[j];
    }
    sum += prod;
  }
  return sum / static_cast<double>(samples_.rows());
}

double KernelDensity::LogDensity(std::span<const double> x) const {
  if (x.size() != dimension()) throw InputError("feature vector has wrong length");
  double log_norm = 0.0;
  for (double h : bandwidths_) log_norm += std::log(kInvSqrt2Pi / h);
  std::vector<double> exponents(samples_.rows());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples_.rows(); ++i) {
    const auto s = samples_.row(i);
    double e = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double u = (x[j] - s[j]) / bandwidths_[j];
      e -= 0.5 * u * u;
    }
    exponents[i] = e;
    top = std::max(top, e);
  }
  double sum = 0.0;
  for (double e : exponents) sum += std::exp(e - top);
  return log_norm + top + std::log(sum / static_cast<double>(samples_.rows()));
}

nlohmann::json KernelDensity::ToJson() const {
  return {{"type", "kde"},
          {"rows", samples_.rows()},
          {"cols", samples_.cols()},
          {"bandwidths", bandwidths_},
          {"samples", samples_.data()}};
}

KernelDensity KernelDensity::FromJson(const nlohmann::json& j) {
  KernelDensity kde;
  kde.samples_ = Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                        j.at("samples").get<std::vector<double>>());
  kde.bandwidths_ = j.at("bandwidths").get<std::vector<double>>();
  return kde;
}

}  // namespace bcops
