#include "bcops/mixshift.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bcops/errors.h"
#include "bcops/random.h"

namespace bcops {

double EtaModel::Eta(ClassId l, std::span<const double> x) const {
  return ClippedLogit(scorers_.at(static_cast<std::size_t>(l - 1))->Score(x));
}

std::vector<double> EtaModel::Eta(ClassId l, const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(Eta(l, data.row(i)));
  return out;
}

EtaModel FitEta(const Dataset& train_fold, const Dataset& test_fold, const LearnerConfig& learner,
                std::uint64_t seed) {
  RequireTrainingLabels(train_fold);
  if (test_fold.size() == 0) throw InputError("empty test fold");
  std::vector<std::shared_ptr<const BinaryScorer>> scorers;
  for (ClassId l = 1; l <= train_fold.class_count; ++l) {
    const Dataset pos = ClassSubset(train_fold, l);
    if (pos.size() == 0) {
      throw InputError("class " + train_fold.ClassName(l) + " missing from training fold");
    }
    LearnerConfig config = learner;
    config.seed = DeriveSeed(seed, {static_cast<std::uint64_t>(l)});
    scorers.push_back(std::make_shared<BinaryScorer>(FitBinary(pos, test_fold, config)));
  }
  return EtaModel(std::move(scorers));
}

double LowerEmpiricalQuantile(std::vector<double> values, double alpha) {
  if (values.empty()) throw InputError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto j = static_cast<std::size_t>(std::floor(static_cast<double>(n) * alpha + 1e-9));
  return values[std::min(j, n - 1)];
}

RegionModel RegionModel::Build(std::vector<double> eta_values, double zeta,
                               std::optional<double> bandwidth) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw InputError("zeta must lie in (0, 1)");
  if (eta_values.size() < 2 && !bandwidth) {
    throw InputError("region needs at least 2 values");
  }
  KernelDensity1D density = KernelDensity1D::Fit(eta_values, bandwidth);
  std::vector<double> heights;
  heights.reserve(eta_values.size());
  for (double t : eta_values) heights.push_back(density.Density(t));
  const double threshold = LowerEmpiricalQuantile(std::move(heights), zeta);
  return RegionModel(std::move(density), threshold, zeta);
}

DesignSystem AssembleSystem(const std::vector<RegionModel>& regions, const EtaModel& eta,
                            const Dataset& train_holdout, const Dataset& test_holdout) {
  RequireTrainingLabels(train_holdout);
  const int K = eta.class_count();
  if (static_cast<int>(regions.size()) != K || train_holdout.class_count != K) {
    throw InputError("region count does not match class count");
  }
  if (test_holdout.size() == 0) throw InputError("empty test holdout");
  DesignSystem system;
  system.design = Matrix(static_cast<std::size_t>(K), static_cast<std::size_t>(K));
  system.response.assign(static_cast<std::size_t>(K), 0.0);
  system.empty_region.assign(static_cast<std::size_t>(K), false);

  std::vector<Dataset> holdouts;
  for (ClassId k = 1; k <= K; ++k) {
    holdouts.push_back(ClassSubset(train_holdout, k));
    if (holdouts.back().size() == 0) {
      throw InputError("class " + train_holdout.ClassName(k) + " has an empty holdout");
    }
  }
  auto hit_rate = [&](ClassId l, const Dataset& data) {
    std::size_t hits = 0;
    const auto& region = regions[static_cast<std::size_t>(l - 1)];
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (region.Contains(eta.Eta(l, data.row(i)))) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
  };
  for (ClassId l = 1; l <= K; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    bool any = false;
    for (ClassId k = 1; k <= K; ++k) {
      const double v = hit_rate(l, holdouts[static_cast<std::size_t>(k - 1)]);
      system.design(li, static_cast<std::size_t>(k - 1)) = v;
      any = any || v > 0.0;
    }
    system.response[li] = hit_rate(l, test_holdout);
    system.empty_region[li] = !any;
  }
  return system;
}

nlohmann::json DesignSystem::ToJson() const {
  std::vector<std::vector<double>> rows;
  for (std::size_t l = 0; l < design.rows(); ++l) {
    rows.emplace_back(design.row(l).begin(), design.row(l).end());
  }
  return {{"design", rows}, {"response", response}, {"empty_region", empty_region}};
}

std::vector<double> ProjectCappedSimplex(std::span<const double> v) {
  std::vector<double> out(v.size());
  double positive_sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::max(v[i], 0.0);
    positive_sum += out[i];
  }
  if (positive_sum <= 1.0) return out;
  // Project onto the probability simplex: max(v - theta, 0) summing to 1.
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (sorted[i] - candidate > 0.0) theta = candidate;
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  // Rounding can leave the sum a few ulps above 1.
  for (;;) {
    const double sum = std::accumulate(out.begin(), out.end(), 0.0);
    if (sum <= 1.0) break;
    double& largest = *std::max_element(out.begin(), out.end());
    const double reduced = std::max(largest - (sum - 1.0), 0.0);
    largest = reduced < largest ? reduced : std::nextafter(largest, 0.0);
  }
  return out;
}

SolveResult SolveConstrainedLeastSquares(const DesignSystem& system, double tolerance,
                                         int max_iterations) {
  const std::size_t K = system.response.size();
  if (K < 1 || system.design.rows() != K || system.design.cols() != K) {
    throw InputError("design system must be K x K with a length-K response");
  }
  for (double v : system.design.data()) {
    if (!std::isfinite(v)) throw ComputeError("design matrix has a non-finite entry");
  }
  for (double v : system.response) {
    if (!std::isfinite(v)) throw ComputeError("response has a non-finite entry");
  }

  Eigen::MatrixXd P(K, K);
  Eigen::VectorXd b(K);
  for (std::size_t l = 0; l < K; ++l) {
    b(static_cast<Eigen::Index>(l)) = system.response[l];
    for (std::size_t k = 0; k < K; ++k) {
      P(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(k)) = system.design(l, k);
    }
  }
  const Eigen::MatrixXd gram = P.transpose() * P;
  const Eigen::VectorXd target = P.transpose() * b;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram, Eigen::EigenvaluesOnly);
  const double largest = eig.eigenvalues().maxCoeff();
  const double smallest = eig.eigenvalues().minCoeff();

  SolveResult result;
  result.condition = smallest > 0.0 ? largest / smallest : std::numeric_limits<double>::infinity();
  result.ill_conditioned = !(result.condition <= 1e8);

  auto objective = [&](const std::vector<double>& pi) {
    double s = 0.0;
    for (std::size_t l = 0; l < K; ++l) {
      double r = system.response[l];
      for (std::size_t k = 0; k < K; ++k) r -= system.design(l, k) * pi[k];
      s += r * r;
    }
    return s;
  };

  std::vector<double> pi(K, 0.0);
  result.objective_trace.push_back(objective(pi));
  if (largest <= 0.0) {
    // Zero design: every feasible point is optimal.
    result.converged = true;
  } else {
    const double step = 1.0 / largest;
    std::vector<double> moved(K);
    for (int it = 0; it < max_iterations; ++it) {
      for (std::size_t k = 0; k < K; ++k) {
        double g = -target(static_cast<Eigen::Index>(k));
        for (std::size_t j = 0; j < K; ++j) {
          g += gram(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * pi[j];
        }
        moved[k] = pi[k] - step * g;
      }
      std::vector<double> next = ProjectCappedSimplex(moved);
      double change = 0.0;
      for (std::size_t k = 0; k < K; ++k) change = std::max(change, std::abs(next[k] - pi[k]));
      pi = std::move(next);
      result.objective_trace.push_back(objective(pi));
      result.iterations = it + 1;
      if (change < tolerance) {
        result.converged = true;
        break;
      }
    }
  }
  result.pi = pi;
  result.residual_norm = std::sqrt(objective(pi));
  return result;
}

MixtureEstimate MixEstimate(const Dataset& train, const Dataset& test, double zeta,
                            const LearnerConfig& learner, std::uint64_t seed) {
  if (!(zeta > 0.0 && zeta < 1.0)) throw InputError("zeta must lie in (0, 1)");
  learner.Validate();
  RequireTrainingLabels(train);
  if (train.class_count < 1) throw InputError("need at least one class");
  for (std::size_t c : ClassCounts(train)) {
    if (c < 4) throw InputError("every class needs at least 4 training rows");
  }
  if (test.size() < 4) throw InputError("mixture estimation needs at least 4 test rows");
  if (test.dimension() != train.dimension()) {
    throw InputError("training and test data differ in dimension");
  }

  const FoldSplit train_split =
      SplitHalf(train, true, DeriveSeed(seed, {kTagMixEstimate, kTagTrainSplit}));
  const FoldSplit test_split = SplitHalfAligned(
      test, DeriveSeed(seed, {kTagMixEstimate, kTagTestSplit}), train, train_split);
  const Dataset train_fold[2] = {Subset(train, train_split.Rows(1)),
                                 Subset(train, train_split.Rows(2))};
  const Dataset test_fold[2] = {Subset(test, test_split.Rows(1)), Subset(test, test_split.Rows(2))};

  std::vector<EtaModel> etas;
  for (int t = 1; t <= 2; ++t) {
    etas.push_back(FitEta(train_fold[t - 1], test_fold[t - 1], learner,
                          DeriveSeed(seed, {kTagMixEstimate, kTagLearner,
                                            static_cast<std::uint64_t>(t)})));
  }

  MixtureEstimate estimate;
  estimate.zeta = zeta;
  const std::size_t K = static_cast<std::size_t>(train.class_count);
  estimate.pi.assign(K, 0.0);
  for (int t = 1; t <= 2; ++t) {
    const int other = OtherFold(t);
    const auto ti = static_cast<std::size_t>(t - 1);
    const EtaModel& eta = etas[ti];
    const Dataset& holdout = train_fold[other - 1];
    std::vector<RegionModel> regions;
    for (ClassId l = 1; l <= train.class_count; ++l) {
      regions.push_back(RegionModel::Build(eta.Eta(l, ClassSubset(holdout, l)), zeta));
      estimate.bandwidths[ti].push_back(regions.back().density().bandwidth());
    }
    estimate.eta_fold[ti] = t;
    estimate.holdout_fold[ti] = other;
    estimate.systems[ti] = AssembleSystem(regions, eta, holdout, test_fold[other - 1]);
    estimate.solves[ti] = SolveConstrainedLeastSquares(estimate.systems[ti]);
    estimate.fold_pi[ti] = estimate.solves[ti].pi;
    for (std::size_t k = 0; k < K; ++k) estimate.pi[k] += 0.5 * estimate.fold_pi[ti][k];
  }
  estimate.epsilon = 1.0 - std::accumulate(estimate.pi.begin(), estimate.pi.end(), 0.0);
  return estimate;
}

nlohmann::json MixtureEstimate::ToJson() const {
  nlohmann::json folds = nlohmann::json::array();
  for (std::size_t t = 0; t < 2; ++t) {
    folds.push_back({{"eta_fold", eta_fold[t]},
                     {"holdout_fold", holdout_fold[t]},
                     {"pi", fold_pi[t]},
                     {"system", systems[t].ToJson()},
                     {"residual_norm", solves[t].residual_norm},
                     {"iterations", solves[t].iterations},
                     {"converged", solves[t].converged},
                     {"condition", std::isfinite(solves[t].condition)
                                       ? nlohmann::json(solves[t].condition)
                                       : nlohmann::json("inf")},
                     {"ill_conditioned", solves[t].ill_conditioned},
                     {"kde_bandwidth_rule", "silverman"},
                     {"kde_bandwidths", bandwidths[t]}});
  }
  return {{"pi", pi}, {"epsilon", epsilon}, {"zeta", zeta}, {"folds", folds}};
}

}  // namespace bcops
