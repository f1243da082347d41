#ifndef BCOPS_RANDOM_FOREST_H_
#define BCOPS_RANDOM_FOREST_H_

#include <span>
#include <vector>

#include "bcops/learner_config.h"
#include "bcops/matrix.h"
#include "json.hpp"

namespace bcops {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int prediction = 0;  // majority class at the node
};

class DecisionTree {
 public:
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  int Predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  int depth() const;

 private:
  std::vector<TreeNode> nodes_;
};

// CART classification forest with Gini splits and majority-vote leaves.
// Class probabilities are vote fractions, so with B trees every probability
// lies on the grid {0, 1/B, ..., 1}.
class RandomForest {
 public:
  // labels are 0-based class indices in [0, num_classes).
  static RandomForest Fit(const Matrix& x, std::span<const int> labels, int num_classes,
                          const LearnerConfig& config);

  std::vector<double> Probabilities(std::span<const double> x) const;
  double Probability(std::span<const double> x, int cls) const;

  int num_classes() const { return num_classes_; }
  std::size_t dimension() const { return dimension_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  nlohmann::json ToJson() const;
  static RandomForest FromJson(const nlohmann::json& j);

 private:
  int num_classes_ = 0;
  std::size_t dimension_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace bcops

#endif  // BCOPS_RANDOM_FOREST_H_
