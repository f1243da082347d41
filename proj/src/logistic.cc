#include "bcops/logistic.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bcops/errors.h"

namespace bcops {
namespace {

double Log1pExp(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Weighted mean log-loss with its gradient over a standardized design.
// Parameters are stored row-wise: rows x (p + 1), intercept first.
class Objective {
 public:
  Objective(const Matrix& z, std::span<const int> labels, std::span<const double> weights,
            int rows, bool binary, double l2, double l1)
      : z_(z), labels_(labels), weights_(weights), rows_(rows), binary_(binary), l2_(l2), l1_(l1) {
    total_weight_ = 0.0;
    for (double w : weights) total_weight_ += w;
  }

  std::size_t width() const { return z_.cols() + 1; }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * width(); }

  // Smooth part; fills grad when non-null.
  double Smooth(const std::vector<double>& theta, std::vector<double>* grad) const {
    const std::size_t w = width();
    const std::size_t p = z_.cols();
    if (grad) grad->assign(theta.size(), 0.0);
    std::vector<double> margin(static_cast<std::size_t>(rows_));
    std::vector<double> residual(static_cast<std::size_t>(rows_));
    double loss = 0.0;
    for (std::size_t i = 0; i < z_.rows(); ++i) {
      const auto x = z_.row(i);
      for (int c = 0; c < rows_; ++c) {
        const double* th = theta.data() + static_cast<std::size_t>(c) * w;
        double m = th[0];
        for (std::size_t j = 0; j < p; ++j) m += th[j + 1] * x[j];
        margin[static_cast<std::size_t>(c)] = m;
      }
      const double wi = weights_[i] / total_weight_;
      const int y = labels_[i];
      if (binary_) {
        const double m = margin[0];
        loss += wi * (Log1pExp(m) - (y == 1 ? m : 0.0));
        residual[0] = wi * (Sigmoid(m) - (y == 1 ? 1.0 : 0.0));
      } else {
        const double top = *std::max_element(margin.begin(), margin.end());
        double sum = 0.0;
        for (double m : margin) sum += std::exp(m - top);
        const double lse = top + std::log(sum);
        loss += wi * (lse - margin[static_cast<std::size_t>(y)]);
        for (int c = 0; c < rows_; ++c) {
          const double prob = std::exp(margin[static_cast<std::size_t>(c)] - lse);
          residual[static_cast<std::size_t>(c)] = wi * (prob - (c == y ? 1.0 : 0.0));
        }
      }
      if (grad) {
        for (int c = 0; c < rows_; ++c) {
          double* g = grad->data() + static_cast<std::size_t>(c) * w;
          const double r = residual[static_cast<std::size_t>(c)];
          g[0] += r;
          for (std::size_t j = 0; j < p; ++j) g[j + 1] += r * x[j];
        }
      }
    }
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (k % w == 0) continue;
      loss += 0.5 * l2_ * theta[k] * theta[k];
      if (grad) (*grad)[k] += l2_ * theta[k];
    }
    return loss;
  }

  double Penalty(const std::vector<double>& theta) const {
    if (l1_ == 0.0) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (k % width() != 0) s += std::abs(theta[k]);
    }
    return l1_ * s;
  }

  // Soft-thresholding of the penalized coordinates.
  void Prox(std::vector<double>* theta, double step) const {
    if (l1_ == 0.0) return;
    const double cut = l1_ * step;
    for (std::size_t k = 0; k < theta->size(); ++k) {
      if (k % width() == 0) continue;
      double& v = (*theta)[k];
      v = v > cut ? v - cut : (v < -cut ? v + cut : 0.0);
    }
  }

 private:
  const Matrix& z_;
  std::span<const int> labels_;
  std::span<const double> weights_;
  int rows_;
  bool binary_;
  double l2_, l1_;
  double total_weight_;
};

}  // namespace

LogisticModel LogisticModel::FitBinary(const Matrix& x, std::span<const int> labels,
                                       std::span<const double> weights,
                                       const LearnerConfig& config) {
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("binary labels must be 0 or 1");
  }
  return Fit(x, labels, weights, 2, true, config);
}

LogisticModel LogisticModel::FitMultinomial(const Matrix& x, std::span<const int> labels,
                                            int num_classes, const LearnerConfig& config) {
  if (num_classes < 2) throw InputError("multinomial model needs at least 2 classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InputError("label outside class range");
  }
  std::vector<double> weights(labels.size(), 1.0);
  return Fit(x, labels, weights, num_classes, false, config);
}

LogisticModel LogisticModel::Fit(const Matrix& x, std::span<const int> labels,
                                 std::span<const double> weights, int num_classes, bool binary,
                                 const LearnerConfig& config) {
  config.Validate();
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  if (n == 0) throw InputError("logistic regression needs training rows");
  if (labels.size() != n || weights.size() != n) {
    throw InputError("labels/weights do not match rows");
  }

  LogisticModel model;
  model.num_classes_ = num_classes;
  model.binary_ = binary;
  model.mean_.assign(p, 0.0);
  model.scale_.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    model.mean_[j] = mean;
    model.scale_[j] = sd > 1e-12 ? sd : 1.0;
  }
  Matrix z(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) z(i, j) = (x(i, j) - model.mean_[j]) / model.scale_[j];
  }

  const int rows = binary ? 1 : num_classes;
  Objective objective(z, labels, weights, rows, binary, config.l2, config.l1);

  // Monotone FISTA with momentum restart whenever the extrapolated step fails
  // to decrease the objective.
  std::vector<double> current(objective.size(), 0.0);
  double current_value = objective.Smooth(current, nullptr) + objective.Penalty(current);
  model.trace_.push_back(current_value);
  std::vector<double> previous = current;
  std::vector<double> y = current;
  std::vector<double> grad, candidate(objective.size());
  double lipschitz = 0.01;
  double momentum = 1.0;
  for (int it = 0; it < config.max_iterations; ++it) {
    const double fy = objective.Smooth(y, &grad);
    double fz = 0.0;
    double gap = 0.0;
    while (true) {
      for (std::size_t k = 0; k < y.size(); ++k) candidate[k] = y[k] - grad[k] / lipschitz;
      objective.Prox(&candidate, 1.0 / lipschitz);
      fz = objective.Smooth(candidate, nullptr);
      double linear = 0.0, quad = 0.0;
      gap = 0.0;
      for (std::size_t k = 0; k < y.size(); ++k) {
        const double d = candidate[k] - y[k];
        linear += grad[k] * d;
        quad += d * d;
        gap = std::max(gap, std::abs(d));
      }
      if (fz <= fy + linear + 0.5 * lipschitz * quad + 1e-15 * std::abs(fy)) break;
      lipschitz *= 2.0;
      if (!std::isfinite(lipschitz) || lipschitz > 1e300) {
        throw ComputeError("logistic line search failed to find a step");
      }
    }
    const double candidate_value = fz + objective.Penalty(candidate);
    const double gradient_mapping = lipschitz * gap;
    const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    if (candidate_value <= current_value) {
      previous = current;
      current = candidate;
      current_value = candidate_value;
      model.trace_.push_back(current_value);
      for (std::size_t k = 0; k < y.size(); ++k) {
        y[k] = current[k] + ((momentum - 1.0) / next_momentum) * (current[k] - previous[k]);
      }
      momentum = next_momentum;
    } else {
      // Restart from the last accepted iterate.
      y = current;
      momentum = 1.0;
    }
    if (gradient_mapping < config.tolerance) {
      model.converged_ = true;
      break;
    }
  }

  const std::size_t w = objective.width();
  model.coef_.assign(static_cast<std::size_t>(rows), std::vector<double>(w));
  for (int c = 0; c < rows; ++c) {
    std::copy_n(current.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * w),
                w, model.coef_[static_cast<std::size_t>(c)].begin());
  }
  return model;
}

std::vector<double> LogisticModel::Margins(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw InputError("feature vector has wrong length");
  std::vector<double> out;
  out.reserve(coef_.size());
  for (const auto& row : coef_) {
    double m = row[0];
    for (std::size_t j = 0; j < x.size(); ++j) m += row[j + 1] * (x[j] - mean_[j]) / scale_[j];
    out.push_back(m);
  }
  return out;
}

std::vector<double> LogisticModel::Probabilities(std::span<const double> x) const {
  const auto margins = Margins(x);
  if (binary_) {
    const double p1 = Sigmoid(margins[0]);
    return {1.0 - p1, p1};
  }
  const double top = *std::max_element(margins.begin(), margins.end());
  std::vector<double> probs(margins.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < margins.size(); ++c) {
    probs[c] = std::exp(margins[c] - top);
    sum += probs[c];
  }
  for (double& v : probs) v /= sum;
  return probs;
}

nlohmann::json LogisticModel::ToJson() const {
  return {{"type", "logistic"},         {"num_classes", num_classes_},
          {"binary", binary_},          {"mean", mean_},
          {"scale", scale_},            {"coefficients", coef_},
          {"converged", converged_},    {"iterations", trace_.size() - 1}};
}

LogisticModel LogisticModel::FromJson(const nlohmann::json& j) {
  LogisticModel m;
  m.num_classes_ = j.at("num_classes").get<int>();
  m.binary_ = j.at("binary").get<bool>();
  m.mean_ = j.at("mean").get<std::vector<double>>();
  m.scale_ = j.at("scale").get<std::vector<double>>();
  m.coef_ = j.at("coefficients").get<std::vector<std::vector<double>>>();
  m.converged_ = j.value("converged", false);
  return m;
}

}  // namespace bcops
