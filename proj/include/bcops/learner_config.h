#ifndef BCOPS_LEARNER_CONFIG_H_
#define BCOPS_LEARNER_CONFIG_H_

#include <cstdint>
#include <string>

#include "json.hpp"

namespace bcops {

enum class LearnerKind { kRandomForest, kLogistic };

std::string LearnerKindName(LearnerKind kind);
LearnerKind ParseLearnerKind(const std::string& name);  // "rf" | "glm"

struct LearnerConfig {
  LearnerKind kind = LearnerKind::kRandomForest;

  // Random forest.
  int num_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  int min_leaf_size = 5;
  int features_per_split = 0;  // 0 = ceil(sqrt(p))
  bool bootstrap = true;

  // Penalized logistic / multinomial regression on standardized features.
  double l2 = 1e-3;
  double l1 = 0.0;
  int max_iterations = 5000;
  double tolerance = 1e-8;

  std::uint64_t seed = 0;

  // Throws InputError.
  void Validate() const;
  nlohmann::json ToJson() const;
  static LearnerConfig FromJson(const nlohmann::json& j);
};

}  // namespace bcops

#endif  // BCOPS_LEARNER_CONFIG_H_
