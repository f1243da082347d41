#ifndef BCOPS_LOGISTIC_H_
#define BCOPS_LOGISTIC_H_

#include <span>
#include <vector>

#include "bcops/learner_config.h"
#include "bcops/matrix.h"
#include "json.hpp"

namespace bcops {

// Penalized logistic (two classes) or multinomial regression, fitted on
// internally standardized features. The objective is the weighted mean
// log-loss plus l2/2 * |beta|^2 + l1 * |beta|_1, intercepts unpenalized,
// minimized with monotone FISTA and backtracking.
class LogisticModel {
 public:
  // labels in {0, 1}; the model scores P(label = 1 | x).
  static LogisticModel FitBinary(const Matrix& x, std::span<const int> labels,
                                 std::span<const double> weights, const LearnerConfig& config);
  // labels in [0, num_classes).
  static LogisticModel FitMultinomial(const Matrix& x, std::span<const int> labels,
                                      int num_classes, const LearnerConfig& config);

  // Probability of every class. Binary models return {P(0), P(1)}.
  std::vector<double> Probabilities(std::span<const double> x) const;
  // Linear predictor of each coefficient row (one row for binary models).
  std::vector<double> Margins(std::span<const double> x) const;

  int num_classes() const { return num_classes_; }
  bool binary() const { return binary_; }
  std::size_t dimension() const { return mean_.size(); }
  // Objective value after each accepted iterate, starting at the zero model.
  const std::vector<double>& objective_trace() const { return trace_; }
  bool converged() const { return converged_; }
  // Rows of (intercept, beta_1..beta_p) on the standardized scale.
  const std::vector<std::vector<double>>& coefficients() const { return coef_; }

  nlohmann::json ToJson() const;
  static LogisticModel FromJson(const nlohmann::json& j);

 private:
  static LogisticModel Fit(const Matrix& x, std::span<const int> labels,
                           std::span<const double> weights, int num_classes, bool binary,
                           const LearnerConfig& config);

  int num_classes_ = 2;
  bool binary_ = true;
  std::vector<double> mean_;
  std::vector<double> scale_;
  std::vector<std::vector<double>> coef_;
  std::vector<double> trace_;
  bool converged_ = false;
};

}  // namespace bcops

#endif  // BCOPS_LOGISTIC_H_
