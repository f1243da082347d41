#ifndef BCOPS_MIXSHIFT_H_
#define BCOPS_MIXSHIFT_H_

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bcops/dataset.h"
#include "bcops/kde.h"
#include "bcops/learners.h"
#include "bcops/matrix.h"
#include "json.hpp"

namespace bcops {

inline constexpr double kDefaultZeta = 0.2;

// Per-class log-odds eta_l(x) = logit(P(class l | x)) from a class-l-vs-test
// classifier trained on one fold, clipped away from 0 and 1.
class EtaModel {
 public:
  explicit EtaModel(std::vector<std::shared_ptr<const BinaryScorer>> scorers)
      : scorers_(std::move(scorers)) {}

  double Eta(ClassId l, std::span<const double> x) const;
  std::vector<double> Eta(ClassId l, const Dataset& data) const;
  int class_count() const { return static_cast<int>(scorers_.size()); }

 private:
  std::vector<std::shared_ptr<const BinaryScorer>> scorers_;
};

// Fits eta on one fold. Every class must have >= 2 rows in train_fold and
// test_fold must have >= 2 rows.
EtaModel FitEta(const Dataset& train_fold, const Dataset& test_fold, const LearnerConfig& learner,
                std::uint64_t seed);

// High-density region {t : g(t) >= q} of the eta values of class l, where g
// is a Gaussian KDE of those values and q is the lower zeta empirical quantile
// of g evaluated at the same values.
class RegionModel {
 public:
  static RegionModel Build(std::vector<double> eta_values, double zeta,
                           std::optional<double> bandwidth = std::nullopt);

  bool Contains(double t) const { return density_.Density(t) >= threshold_; }
  double threshold() const { return threshold_; }
  double zeta() const { return zeta_; }
  const KernelDensity1D& density() const { return density_; }

 private:
  RegionModel(KernelDensity1D density, double threshold, double zeta)
      : density_(std::move(density)), threshold_(threshold), zeta_(zeta) {}

  KernelDensity1D density_;
  double threshold_;
  double zeta_;
};

// Lower-alpha empirical quantile sup{t : F_n(t) <= alpha}: the
// (floor(n * alpha) + 1)-th smallest value.
double LowerEmpiricalQuantile(std::vector<double> values, double alpha);

struct DesignSystem {
  Matrix design;                  // K x K, design(l, k) = P_k(eta_l in S_l)
  std::vector<double> response;   // response[l] = P_test(eta_l in S_l)
  std::vector<bool> empty_region; // rows whose region captured no holdout mass

  nlohmann::json ToJson() const;
};

// Fills the design from the class holdouts and the response from the test
// holdout. Holdouts must come from the fold not used to fit eta.
DesignSystem AssembleSystem(const std::vector<RegionModel>& regions, const EtaModel& eta,
                            const Dataset& train_holdout, const Dataset& test_holdout);

struct SolveResult {
  std::vector<double> pi;
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = false;
  double residual_norm = 0.0;
  // Ratio of extreme eigenvalues of design' design (infinite when singular).
  double condition = 0.0;
  bool ill_conditioned = false;
};

// Euclidean projection onto {pi >= 0, sum(pi) <= 1}.
std::vector<double> ProjectCappedSimplex(std::span<const double> v);

// min |response - design * pi|^2 over {pi >= 0, sum(pi) <= 1} by projected
// gradient with step 1/|design' design|_2; stops when successive iterates
// differ by < tolerance in the sup norm.
SolveResult SolveConstrainedLeastSquares(const DesignSystem& system,
                                         double tolerance = 1e-10, int max_iterations = 100000);

struct MixtureEstimate {
  std::vector<double> pi;  // averaged over the two folds
  double epsilon = 0.0;    // 1 - sum(pi)
  std::array<std::vector<double>, 2> fold_pi;
  std::array<DesignSystem, 2> systems;
  std::array<SolveResult, 2> solves;
  std::array<std::vector<double>, 2> bandwidths;
  // Fold that fitted eta for system t, and the fold its design/response
  // were measured on. Always different.
  std::array<int, 2> eta_fold{1, 2};
  std::array<int, 2> holdout_fold{2, 1};
  double zeta = kDefaultZeta;

  nlohmann::json ToJson() const;
};

// Two-fold mixture-proportion estimate of the test distribution in terms of
// the training classes. Requires >= 4 rows per class, >= 4 test rows and
// zeta in (0, 1).
MixtureEstimate MixEstimate(const Dataset& train, const Dataset& test, double zeta,
                            const LearnerConfig& learner, std::uint64_t seed);

}  // namespace bcops

#endif  // BCOPS_MIXSHIFT_H_
