#ifndef BCOPS_EVALKIT_H_
#define BCOPS_EVALKIT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bcops/conformal.h"
#include "bcops/dataset.h"
#include "bcops/learners.h"
#include "bcops/mixshift.h"
#include "json.hpp"

namespace bcops {

// How a training row's prediction set is formed when estimating the
// class-wise abstention rate of a BCOPS model.
enum class GammaKMode {
  // Row in fold t: scorers trained on the other fold, calibrated on fold t
  // with the row itself left out. Exchangeable with a class-k test row.
  kHeldFold,
  // Row in fold t: scorers trained on the other fold t', calibrated on the
  // class rows of fold t' that those scorers were trained on.
  kInSample,
};

std::string GammaKModeName(GammaKMode mode);
GammaKMode ParseGammaKMode(const std::string& name);  // "held-fold" | "in-sample"

// Fraction of class-k training rows whose prediction set is empty, per class
// (index k-1). For DLS/IRS only the calibration rows are used, each ranked
// against the calibration list with itself left out. `train` must be the
// dataset the model was fit on.
std::vector<double> EstimateGammaK(const PredictionSetModel& model, const Dataset& train,
                                   double alpha, GammaKMode mode = GammaKMode::kHeldFold);

struct RateEstimate {
  double value = 0.0;
  // Set when sum(pi) == 1, so no outlier mass is implied.
  bool no_outliers = false;
};

// ((N_empty - sum_k N pi_k gamma_k) v 0) / (N (1 - sum pi) v 1), capped at 1.
RateEstimate EstimateGamma(std::size_t n, std::size_t n_empty, std::span<const double> pi,
                           std::span<const double> gamma_k);

// ((N - N_empty - sum_k N pi_k (1 - gamma_k)) v 0) / ((N - N_empty) v 1).
double EstimateFlr(std::size_t n, std::size_t n_empty, std::span<const double> pi,
                   std::span<const double> gamma_k);

struct ClassMetrics {
  std::size_t count = 0;
  double coverage = 0.0;
  double type1 = 0.0;        // 1 - coverage
  double type2 = 0.0;        // fraction with C(x) \ {y} non-empty
  double accuracy = 0.0;     // fraction with C(x) == {y}
  double abstention = 0.0;   // fraction with C(x) empty
};

struct MetricsReport {
  std::vector<ClassMetrics> classes;  // index k-1
  ClassMetrics outliers;              // coverage/type1 undefined, left 0
  double accuracy = 0.0;              // pooled over inlier rows
  double realized_gamma = 0.0;        // outlier abstention; 0 without outliers
  double flp = 0.0;                   // realized false labeling proportion
  std::size_t n = 0;
  std::size_t n_empty = 0;

  nlohmann::json ToJson() const;
};

// Truth uses kOutlierClass for R rows.
MetricsReport RealizedMetrics(std::span<const PredictionSet> sets, std::span<const ClassId> truth,
                              int class_count);

struct AbstentionReport {
  double alpha = 0.0;
  std::vector<double> gamma_k;
  std::size_t n = 0;
  std::size_t n_empty = 0;
  double gamma_hat = 0.0;
  bool no_outliers = false;
  double flr_hat = 0.0;
  std::optional<double> realized_gamma;
  std::optional<double> flp;

  nlohmann::json ToJson() const;
};

struct TradeoffPoint {
  AbstentionReport abstention;
  std::optional<MetricsReport> metrics;
};

struct TradeoffCurve {
  std::vector<double> alphas;
  std::vector<TradeoffPoint> points;
  MixtureEstimate mixture;
  GammaKMode gamma_k_mode = GammaKMode::kHeldFold;

  // Plot-ready rows: alpha, gamma_hat, flr_hat, gamma_realized, flp, n_empty,
  // then coverage_k and type2_k for every class and type2_R.
  std::string ToCsv() const;
  nlohmann::json ToJson() const;
};

// lo:hi:step, inclusive of hi up to rounding. Throws InputError.
std::vector<double> ParseAlphaGrid(const std::string& spec);
std::vector<double> AlphaGrid(double lo, double hi, double step);

// Evaluates a fitted model over an alpha grid. Ranks are computed once and
// reused at every alpha.
TradeoffCurve EvaluateCurve(const PredictionSetModel& model, const Dataset& train,
                            const Dataset& test, const MixtureEstimate& mixture,
                            std::span<const double> alphas,
                            std::optional<std::span<const ClassId>> truth,
                            GammaKMode mode = GammaKMode::kHeldFold);

struct CurveOptions {
  Method method = Method::kBcops;
  LearnerConfig learner;
  std::vector<double> alphas;
  double zeta = kDefaultZeta;
  std::uint64_t seed = 0;
  GammaKMode gamma_k_mode = GammaKMode::kHeldFold;
};

// Fits the method and MixEstimate once, then evaluates every alpha.
TradeoffCurve ComputeTradeoffCurve(const Dataset& train, const Dataset& test,
                                   const CurveOptions& options,
                                   std::optional<std::span<const ClassId>> truth = std::nullopt);

PredictionSetModel FitMethod(Method method, const Dataset& train, const Dataset& test,
                             const LearnerConfig& learner, std::uint64_t seed);

// Outlier score of a query: gamma_curve at the smallest grid alpha whose set
// is empty, or 0 when no grid alpha empties it. alphas must be ascending and
// gamma_curve aligned with them.
double OutlierScore(const RankVector& ranks, std::span<const double> alphas,
                    std::span<const double> gamma_curve);
double OutlierScore(const PredictionSetModel& model, std::span<const double> x,
                    std::optional<int> fold, std::span<const double> alphas,
                    std::span<const double> gamma_curve);

}  // namespace bcops

#endif  // BCOPS_EVALKIT_H_
