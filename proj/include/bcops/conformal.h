#ifndef BCOPS_CONFORMAL_H_
#define BCOPS_CONFORMAL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcops/dataset.h"
#include "bcops/learners.h"
#include "bcops/random.h"
#include "json.hpp"

namespace bcops {

// 1 + #{z in calibration : v >= z}, i.e. the number of points of
// calibration U {x} that x's score is at least as large as. With tie_rng set,
// x is instead placed uniformly at random among calibration values equal to v.
std::size_t ConformalCount(double v, std::span<const double> sorted_calibration,
                           Rng* tie_rng = nullptr);

// ConformalCount / (m + 1), a value in (0, 1].
double ConformalRank(double v, std::span<const double> sorted_calibration);

// floor((m + 1) * alpha). A 1e-9 guard absorbs decimal-to-binary error so
// that, e.g., alpha = 0.29 with m = 99 yields 29 rather than 28.
std::size_t ThresholdCount(std::size_t m, double alpha);

// ThresholdCount / (m + 1).
double ConformalThreshold(std::size_t m, double alpha);

// Validates alpha in [0, 1]; throws InputError.
void CheckAlpha(double alpha);

enum class Method { kBcops, kDls, kIrs };
std::string MethodName(Method method);
Method ParseMethod(const std::string& name);  // "bcops" | "dls" | "irs"

enum class TieMode { kDeterministic, kRandomized };

// A fitted score function with its calibration scores for one class (and,
// for BCOPS, one fold).
struct CalibratedClassScorer {
  ClassId class_id = 1;
  // Fold the calibration samples come from; 0 when the method is unfolded.
  int fold = 0;
  // Fold whose data trained the score function; 0 when unfolded.
  int trained_on_fold = 0;
  std::shared_ptr<const ScoreFunction> score;
  // Scores of the calibration samples, ascending.
  std::vector<double> calibration;
  // Training-set rows of the calibration samples.
  std::vector<std::size_t> calibration_rows;
  // BCOPS only: the score function evaluated on its own class-k training
  // rows, ascending. Used by the in-sample reading of the class-wise
  // abstention estimate.
  std::vector<double> in_sample_calibration;

  std::size_t m() const { return calibration.size(); }
};

// Per-class conformal counts for one query, before alpha is applied.
struct RankVector {
  std::vector<std::size_t> counts;             // index k-1
  std::vector<std::size_t> calibration_sizes;  // index k-1

  double Rank(ClassId k) const;
  bool Accepts(ClassId k, double alpha) const;
};

struct PredictionSet {
  std::vector<ClassId> members;  // ascending
  std::vector<double> ranks;     // s_k at index k-1
  double alpha = 0.0;

  bool empty() const { return members.empty(); }
  bool Contains(ClassId k) const;
};

PredictionSet ApplyAlpha(const RankVector& ranks, double alpha);

class PredictionSetModel {
 public:
  Method method = Method::kBcops;
  int class_count = 2;
  std::vector<std::string> class_names;
  std::size_t dimension = 0;
  // BCOPS: entry (k, t) at index 2*(k-1) + (t-1). DLS/IRS: entry k at k-1.
  std::vector<CalibratedClassScorer> scorers;
  // BCOPS fold assignment of the training and test rows used at fit time.
  FoldSplit train_split;
  FoldSplit test_split;
  // Fingerprint of the test features the BCOPS model was fit against.
  std::uint64_t test_fingerprint = 0;
  std::uint64_t seed = 0;
  LearnerConfig learner;

  bool folded() const { return method == Method::kBcops; }

  // Scorer applied to queries in fold `fold` (ignored for unfolded methods).
  const CalibratedClassScorer& Scorer(ClassId k, int fold) const;

  // Conformal counts for x. BCOPS requires the test fold of x; DLS and IRS
  // ignore it. With tie_rng set, ties are broken at random.
  RankVector Ranks(std::span<const double> x, std::optional<int> fold,
                   Rng* tie_rng = nullptr) const;

  PredictionSet Predict(std::span<const double> x, std::optional<int> fold, double alpha) const;

  // Ranks for every row of the fitted test set (BCOPS uses the stored test
  // folds). Throws if the dataset does not match the fitted test set for
  // BCOPS.
  std::vector<RankVector> RankTestSet(const Dataset& test, TieMode ties = TieMode::kDeterministic) const;

  // Structural check of the BCOPS cross-fold wiring; throws ComputeError.
  void CheckFoldWiring() const;

  nlohmann::json ToJson() const;
  static PredictionSetModel FromJson(const nlohmann::json& j);
};

std::uint64_t FingerprintFeatures(const Matrix& features);

}  // namespace bcops

#endif  // BCOPS_CONFORMAL_H_
