#include "bcops/methods.h"

#include <algorithm>

#include "bcops/errors.h"
#include "bcops/random.h"

namespace bcops {
namespace {

void RequireClassSizes(const Dataset& train, std::size_t minimum) {
  RequireTrainingLabels(train);
  if (train.class_count < 2) throw InputError("need at least 2 classes");
  const auto counts = ClassCounts(train);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < minimum) {
      throw InputError("class " + train.class_names[k] + " has " + std::to_string(counts[k]) +
                       " training samples; need at least " + std::to_string(minimum));
    }
  }
}

std::vector<double> SortedScores(const ScoreFunction& score, const Dataset& data,
                                 std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(score.Score(data.row(r)));
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> Intersect(const std::vector<std::size_t>& a, const FoldSplit& split,
                                   int fold) {
  std::vector<std::size_t> out;
  for (std::size_t r : a) {
    if (split.fold_of[r] == fold) out.push_back(r);
  }
  return out;
}

PredictionSetModel EmptyModel(Method method, const Dataset& train, std::uint64_t seed) {
  PredictionSetModel model;
  model.method = method;
  model.class_count = train.class_count;
  model.class_names = train.class_names;
  model.dimension = train.dimension();
  model.seed = seed;
  return model;
}

}  // namespace

BinaryFitter LearnerFitter(const LearnerConfig& learner) {
  return [learner](const Dataset& pos, const Dataset& neg, std::uint64_t seed) {
    LearnerConfig config = learner;
    config.seed = seed;
    return std::shared_ptr<const ScoreFunction>(
        std::make_shared<BinaryScorer>(FitBinary(pos, neg, config)));
  };
}

PredictionSetModel FitBcops(const Dataset& train, const Dataset& test,
                            const LearnerConfig& learner, std::uint64_t seed) {
  learner.Validate();
  RequireClassSizes(train, 4);
  if (test.dimension() != train.dimension()) {
    throw InputError("training and test data differ in dimension");
  }
  if (test.size() < 4) throw InputError("BCOPS needs at least 4 test rows");

  PredictionSetModel model = EmptyModel(Method::kBcops, train, seed);
  model.learner = learner;
  model.train_split = SplitHalf(train, true, DeriveSeed(seed, {kTagTrainSplit}));
  model.test_split =
      SplitHalfAligned(test, DeriveSeed(seed, {kTagTestSplit}), train, model.train_split);
  model.test_fingerprint = FingerprintFeatures(test.features);

  const Dataset test_fold[2] = {Subset(test, model.test_split.Rows(1)),
                                Subset(test, model.test_split.Rows(2))};
  const BinaryFitter fit = LearnerFitter(learner);
  const int K = train.class_count;

  for (ClassId k = 1; k <= K; ++k) {
    const auto class_rows = ClassRows(train, k);
    const std::vector<std::size_t> rows[2] = {Intersect(class_rows, model.train_split, 1),
                                              Intersect(class_rows, model.train_split, 2)};
    // trained[t-1] separates the class-k rows of fold t from test fold t.
    std::shared_ptr<const ScoreFunction> trained[2];
    for (int t = 1; t <= 2; ++t) {
      const auto tag = static_cast<std::uint64_t>(2 * (k - 1) + (t - 1));
      trained[t - 1] = fit(Subset(train, rows[t - 1]), test_fold[t - 1],
                           DeriveSeed(seed, {kTagLearner, tag}));
    }
    for (int t = 1; t <= 2; ++t) {
      const int other = OtherFold(t);
      CalibratedClassScorer entry;
      entry.class_id = k;
      entry.fold = t;
      entry.trained_on_fold = other;
      entry.score = trained[other - 1];
      entry.calibration = SortedScores(*entry.score, train, rows[t - 1]);
      entry.calibration_rows = rows[t - 1];
      entry.in_sample_calibration = SortedScores(*entry.score, train, rows[other - 1]);
      model.scorers.push_back(std::move(entry));
    }
  }
  model.CheckFoldWiring();
  return model;
}

PredictionSetModel FitDls(const Dataset& train, std::uint64_t seed) {
  RequireClassSizes(train, 4);
  PredictionSetModel model = EmptyModel(Method::kDls, train, seed);
  for (ClassId k = 1; k <= train.class_count; ++k) {
    const auto class_rows = ClassRows(train, k);
    const Dataset class_data = Subset(train, class_rows);
    const FoldSplit halves = SplitHalf(class_data, false,
                                       DeriveSeed(seed, {kTagClassSplit, static_cast<std::uint64_t>(k)}));
    std::vector<std::size_t> fit_rows, calibration_rows;
    for (std::size_t i = 0; i < class_rows.size(); ++i) {
      (halves.fold_of[i] == 1 ? fit_rows : calibration_rows).push_back(class_rows[i]);
    }
    CalibratedClassScorer entry;
    entry.class_id = k;
    entry.score = std::make_shared<LogDensityScore>(FitKdeMulti(Subset(train, fit_rows)));
    entry.calibration = SortedScores(*entry.score, train, calibration_rows);
    entry.calibration_rows = std::move(calibration_rows);
    model.scorers.push_back(std::move(entry));
  }
  return model;
}

PredictionSetModel FitIrs(const Dataset& train, const LearnerConfig& learner, std::uint64_t seed) {
  learner.Validate();
  RequireClassSizes(train, 4);
  PredictionSetModel model = EmptyModel(Method::kIrs, train, seed);
  model.learner = learner;
  const FoldSplit split = SplitHalf(train, true, DeriveSeed(seed, {kTagTrainSplit}));
  model.train_split = split;

  LearnerConfig config = learner;
  config.seed = DeriveSeed(seed, {kTagLearner});
  auto classifier = std::make_shared<const MulticlassScorer>(
      FitMulticlass(Subset(train, split.Rows(1)), config));
  for (ClassId k = 1; k <= train.class_count; ++k) {
    CalibratedClassScorer entry;
    entry.class_id = k;
    entry.score = std::make_shared<ClassProbabilityScore>(classifier, k);
    entry.calibration_rows = Intersect(ClassRows(train, k), split, 2);
    entry.calibration = SortedScores(*entry.score, train, entry.calibration_rows);
    model.scorers.push_back(std::move(entry));
  }
  return model;
}

PredictionSet BcopsFullConformal(const Dataset& train, const Dataset& test, std::size_t x_index,
                                 const BinaryFitter& fitter, double alpha, std::uint64_t seed) {
  CheckAlpha(alpha);
  RequireClassSizes(train, 1);
  if (test.dimension() != train.dimension()) {
    throw InputError("training and test data differ in dimension");
  }
  if (x_index >= test.size()) throw InputError("test row index out of range");

  const auto x = test.row(x_index);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (i != x_index) others.push_back(i);
  }
  const Dataset rest = Subset(test, others);

  PredictionSet set;
  set.alpha = alpha;
  for (ClassId k = 1; k <= train.class_count; ++k) {
    Dataset augmented = ClassSubset(train, k);
    const std::size_t m = augmented.size();
    augmented.features.AppendRow(x);
    augmented.labels->push_back(k);
    const auto score = fitter(augmented, rest,
                              DeriveSeed(seed, {kTagLearner, static_cast<std::uint64_t>(k)}));
    std::vector<double> calibration;
    calibration.reserve(m);
    for (std::size_t i = 0; i < m; ++i) calibration.push_back(score->Score(augmented.row(i)));
    std::sort(calibration.begin(), calibration.end());
    const std::size_t count = ConformalCount(score->Score(x), calibration);
    set.ranks.push_back(static_cast<double>(count) / static_cast<double>(m + 1));
    if (count >= ThresholdCount(m, alpha)) set.members.push_back(k);
  }
  return set;
}

PredictionSet BcopsFullConformal(const Dataset& train, const Dataset& test, std::size_t x_index,
                                 const LearnerConfig& learner, double alpha, std::uint64_t seed) {
  learner.Validate();
  return BcopsFullConformal(train, test, x_index, LearnerFitter(learner), alpha, seed);
}

}  // namespace bcops
