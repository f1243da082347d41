#ifndef BCOPS_LEARNERS_H_
#define BCOPS_LEARNERS_H_

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "bcops/dataset.h"
#include "bcops/kde.h"
#include "bcops/learner_config.h"
#include "bcops/logistic.h"
#include "bcops/random_forest.h"
#include "json.hpp"

namespace bcops {

// A real-valued conformal score v(x); larger means more typical of the class
// it was built for. Only the ordering of scores matters downstream.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual double Score(std::span<const double> x) const = 0;
  virtual std::size_t dimension() const = 0;
  virtual nlohmann::json ToJson() const = 0;
};

std::shared_ptr<const ScoreFunction> ScoreFunctionFromJson(const nlohmann::json& j);

// Estimates P(sample came from the positive set | x).
class BinaryScorer final : public ScoreFunction {
 public:
  struct Metadata {
    std::size_t positives = 0;
    std::size_t negatives = 0;
    std::uint64_t seed = 0;
    // "inverse-frequency" (logistic) or "none" (forest, unweighted bootstrap).
    std::string weighting;
  };

  BinaryScorer(std::variant<RandomForest, LogisticModel> model, Metadata metadata)
      : model_(std::move(model)), metadata_(std::move(metadata)) {}

  double Score(std::span<const double> x) const override;
  std::size_t dimension() const override;
  nlohmann::json ToJson() const override;
  static BinaryScorer FromJson(const nlohmann::json& j);

  LearnerKind kind() const;
  const Metadata& metadata() const { return metadata_; }
  const std::variant<RandomForest, LogisticModel>& model() const { return model_; }

 private:
  std::variant<RandomForest, LogisticModel> model_;
  Metadata metadata_;
};

// Requires pos.size() >= 2, neg.size() >= 2 and matching dimensions.
BinaryScorer FitBinary(const Dataset& pos, const Dataset& neg, const LearnerConfig& config);

// K-class probability model.
class MulticlassScorer {
 public:
  explicit MulticlassScorer(std::variant<RandomForest, LogisticModel> model)
      : model_(std::move(model)) {}

  // Index k-1 holds P(class k | x).
  std::vector<double> Probabilities(std::span<const double> x) const;
  int num_classes() const;
  std::size_t dimension() const;
  nlohmann::json ToJson() const;
  static MulticlassScorer FromJson(const nlohmann::json& j);

 private:
  std::variant<RandomForest, LogisticModel> model_;
};

// Requires labels, K >= 2 and at least 2 samples of every class.
MulticlassScorer FitMulticlass(const Dataset& train, const LearnerConfig& config);

// P(class k | x) from a shared multiclass model.
class ClassProbabilityScore final : public ScoreFunction {
 public:
  ClassProbabilityScore(std::shared_ptr<const MulticlassScorer> model, ClassId k)
      : model_(std::move(model)), class_id_(k) {}

  double Score(std::span<const double> x) const override;
  std::size_t dimension() const override { return model_->dimension(); }
  nlohmann::json ToJson() const override;

 private:
  std::shared_ptr<const MulticlassScorer> model_;
  ClassId class_id_;
};

// log f(x) for a product-kernel density estimate.
class LogDensityScore final : public ScoreFunction {
 public:
  explicit LogDensityScore(KernelDensity density) : density_(std::move(density)) {}

  double Score(std::span<const double> x) const override { return density_.LogDensity(x); }
  std::size_t dimension() const override { return density_.dimension(); }
  nlohmann::json ToJson() const override;
  const KernelDensity& density() const { return density_; }

 private:
  KernelDensity density_;
};

// Product-kernel density with per-dimension Silverman bandwidths.
KernelDensity FitKdeMulti(const Dataset& data);

// logit(clamp(p, 1e-6, 1 - 1e-6)).
double ClippedLogit(double p);

}  // namespace bcops

#endif  // BCOPS_LEARNERS_H_
