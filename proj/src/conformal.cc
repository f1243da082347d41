#include "bcops/conformal.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "bcops/errors.h"

namespace bcops {

std::size_t ConformalCount(double v, std::span<const double> sorted_calibration, Rng* tie_rng) {
  if (sorted_calibration.empty()) throw InputError("empty calibration set");
  const auto upper = static_cast<std::size_t>(
      std::upper_bound(sorted_calibration.begin(), sorted_calibration.end(), v) -
      sorted_calibration.begin());
  if (tie_rng == nullptr) return upper + 1;
  const auto lower = static_cast<std::size_t>(
      std::lower_bound(sorted_calibration.begin(), sorted_calibration.end(), v) -
      sorted_calibration.begin());
  std::uniform_int_distribution<std::size_t> position(0, upper - lower);
  return lower + 1 + position(*tie_rng);
}

double ConformalRank(double v, std::span<const double> sorted_calibration) {
  return static_cast<double>(ConformalCount(v, sorted_calibration)) /
         static_cast<double>(sorted_calibration.size() + 1);
}

void CheckAlpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
}

std::size_t ThresholdCount(std::size_t m, double alpha) {
  if (m < 1) throw InputError("calibration size must be >= 1");
  CheckAlpha(alpha);
  const double scaled = static_cast<double>(m + 1) * alpha;
  return std::min(static_cast<std::size_t>(std::floor(scaled + 1e-9)), m + 1);
}

double ConformalThreshold(std::size_t m, double alpha) {
  return static_cast<double>(ThresholdCount(m, alpha)) / static_cast<double>(m + 1);
}

std::string MethodName(Method method) {
  switch (method) {
    case Method::kBcops:
      return "bcops";
    case Method::kDls:
      return "dls";
    case Method::kIrs:
      return "irs";
  }
  return "?";
}

Method ParseMethod(const std::string& name) {
  if (name == "bcops") return Method::kBcops;
  if (name == "dls") return Method::kDls;
  if (name == "irs") return Method::kIrs;
  throw InputError("unknown method '" + name + "'");
}

double RankVector::Rank(ClassId k) const {
  const auto i = static_cast<std::size_t>(k - 1);
  return static_cast<double>(counts[i]) / static_cast<double>(calibration_sizes[i] + 1);
}

bool RankVector::Accepts(ClassId k, double alpha) const {
  const auto i = static_cast<std::size_t>(k - 1);
  return counts[i] >= ThresholdCount(calibration_sizes[i], alpha);
}

bool PredictionSet::Contains(ClassId k) const {
  return std::binary_search(members.begin(), members.end(), k);
}

PredictionSet ApplyAlpha(const RankVector& ranks, double alpha) {
  CheckAlpha(alpha);
  PredictionSet set;
  set.alpha = alpha;
  for (std::size_t i = 0; i < ranks.counts.size(); ++i) {
    const auto k = static_cast<ClassId>(i + 1);
    set.ranks.push_back(ranks.Rank(k));
    if (ranks.Accepts(k, alpha)) set.members.push_back(k);
  }
  return set;
}

const CalibratedClassScorer& PredictionSetModel::Scorer(ClassId k, int fold) const {
  if (k < 1 || k > class_count) throw InputError("class id out of range");
  if (!folded()) return scorers.at(static_cast<std::size_t>(k - 1));
  if (fold != 1 && fold != 2) throw InputError("fold must be 1 or 2");
  return scorers.at(static_cast<std::size_t>(2 * (k - 1) + (fold - 1)));
}

RankVector PredictionSetModel::Ranks(std::span<const double> x, std::optional<int> fold,
                                     Rng* tie_rng) const {
  if (x.size() != dimension) throw InputError("feature vector has wrong length");
  if (folded() && !fold) {
    throw InputError("BCOPS prediction needs the test fold of the query row");
  }
  RankVector out;
  for (ClassId k = 1; k <= class_count; ++k) {
    const auto& entry = Scorer(k, fold.value_or(0));
    const double v = entry.score->Score(x);
    out.counts.push_back(ConformalCount(v, entry.calibration, tie_rng));
    out.calibration_sizes.push_back(entry.m());
  }
  return out;
}

PredictionSet PredictionSetModel::Predict(std::span<const double> x, std::optional<int> fold,
                                          double alpha) const {
  return ApplyAlpha(Ranks(x, fold), alpha);
}

std::vector<RankVector> PredictionSetModel::RankTestSet(const Dataset& test, TieMode ties) const {
  if (test.dimension() != dimension) throw InputError("test set has wrong dimension");
  if (folded()) {
    if (test.size() != test_split.fold_of.size() ||
        FingerprintFeatures(test.features) != test_fingerprint) {
      throw InputError("test set does not match the one the BCOPS model was fit against");
    }
  }
  std::vector<RankVector> out;
  out.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::optional<int> fold;
    if (folded()) fold = test_split.fold_of[i];
    if (ties == TieMode::kRandomized) {
      Rng rng(DeriveSeed(seed, {kTagTies, i}));
      out.push_back(Ranks(test.row(i), fold, &rng));
    } else {
      out.push_back(Ranks(test.row(i), fold));
    }
  }
  return out;
}

void PredictionSetModel::CheckFoldWiring() const {
  if (!folded()) return;
  if (scorers.size() != static_cast<std::size_t>(2 * class_count)) {
    throw ComputeError("BCOPS model must hold two scorers per class");
  }
  for (ClassId k = 1; k <= class_count; ++k) {
    for (int t = 1; t <= 2; ++t) {
      const auto& e = Scorer(k, t);
      if (e.class_id != k || e.fold != t || e.trained_on_fold != OtherFold(t)) {
        throw ComputeError("BCOPS scorer wiring violated for class " + std::to_string(k));
      }
      for (std::size_t r : e.calibration_rows) {
        if (train_split.fold_of.at(r) != t) {
          throw ComputeError("BCOPS calibration row outside its fold");
        }
      }
    }
  }
}

std::uint64_t FingerprintFeatures(const Matrix& features) {
  std::uint64_t h = MixBits(features.rows() * 1315423911ULL + features.cols());
  for (double v : features.data()) h = MixBits(h ^ std::bit_cast<std::uint64_t>(v));
  return h;
}

nlohmann::json PredictionSetModel::ToJson() const {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : scorers) {
    entries.push_back({{"class", e.class_id},
                       {"fold", e.fold},
                       {"trained_on_fold", e.trained_on_fold},
                       {"score", e.score->ToJson()},
                       {"calibration", e.calibration},
                       {"calibration_rows", e.calibration_rows},
                       {"in_sample_calibration", e.in_sample_calibration}});
  }
  return {{"method", MethodName(method)},
          {"class_count", class_count},
          {"class_names", class_names},
          {"dimension", dimension},
          {"seed", seed},
          {"learner", learner.ToJson()},
          {"train_folds", train_split.fold_of},
          {"train_split_seed", train_split.seed},
          {"test_folds", test_split.fold_of},
          {"test_split_seed", test_split.seed},
          {"test_fingerprint", test_fingerprint},
          {"scorers", entries}};
}

PredictionSetModel PredictionSetModel::FromJson(const nlohmann::json& j) {
  PredictionSetModel m;
  m.method = ParseMethod(j.at("method").get<std::string>());
  m.class_count = j.at("class_count").get<int>();
  m.class_names = j.at("class_names").get<std::vector<std::string>>();
  m.dimension = j.at("dimension").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.learner = LearnerConfig::FromJson(j.at("learner"));
  m.train_split.fold_of = j.at("train_folds").get<std::vector<int>>();
  m.train_split.seed = j.at("train_split_seed").get<std::uint64_t>();
  m.test_split.fold_of = j.at("test_folds").get<std::vector<int>>();
  m.test_split.seed = j.at("test_split_seed").get<std::uint64_t>();
  m.test_fingerprint = j.at("test_fingerprint").get<std::uint64_t>();
  for (const auto& e : j.at("scorers")) {
    CalibratedClassScorer s;
    s.class_id = e.at("class").get<int>();
    s.fold = e.at("fold").get<int>();
    s.trained_on_fold = e.at("trained_on_fold").get<int>();
    s.score = ScoreFunctionFromJson(e.at("score"));
    s.calibration = e.at("calibration").get<std::vector<double>>();
    s.calibration_rows = e.at("calibration_rows").get<std::vector<std::size_t>>();
    s.in_sample_calibration = e.at("in_sample_calibration").get<std::vector<double>>();
    m.scorers.push_back(std::move(s));
  }
  m.CheckFoldWiring();
  return m;
}

}  // namespace bcops
