#include "bcops/random_forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "bcops/errors.h"
#include "bcops/random.h"

namespace bcops {
namespace {

struct Split {
  bool found = false;
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

// (gain, feature, threshold) lexicographic: higher gain first, then lower
// feature index, then lower threshold.
bool Better(const Split& candidate, const Split& best) {
  if (!best.found) return true;
  if (candidate.gain != best.gain) return candidate.gain > best.gain;
  if (candidate.feature != best.feature) return candidate.feature < best.feature;
  return candidate.threshold < best.threshold;
}

int Majority(const std::vector<double>& counts) {
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> labels, int num_classes,
              const LearnerConfig& config, Rng& rng)
      : x_(x), labels_(labels), num_classes_(num_classes), config_(config), rng_(rng) {
    const auto p = static_cast<int>(x.cols());
    mtry_ = config.features_per_split > 0
                ? std::min(config.features_per_split, p)
                : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
    features_.resize(x.cols());
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree Build(std::vector<std::size_t> sample) {
    sample_ = std::move(sample);
    nodes_.clear();
    struct Pending {
      int node;
      std::size_t begin, end;
      int depth;
    };
    std::vector<Pending> stack;
    nodes_.emplace_back();
    stack.push_back({0, 0, sample_.size(), 0});
    while (!stack.empty()) {
      const Pending job = stack.back();
      stack.pop_back();
      std::vector<double> counts(static_cast<std::size_t>(num_classes_), 0.0);
      for (std::size_t i = job.begin; i < job.end; ++i) counts[labels_[sample_[i]]] += 1.0;
      nodes_[job.node].prediction = Majority(counts);

      const std::size_t n = job.end - job.begin;
      const bool pure = std::count_if(counts.begin(), counts.end(),
                                      [](double c) { return c > 0; }) <= 1;
      const bool depth_capped = config_.max_depth > 0 && job.depth >= config_.max_depth;
      if (pure || depth_capped || n < 2 * static_cast<std::size_t>(config_.min_leaf_size)) continue;

      const Split split = FindSplit(job.begin, job.end, counts);
      if (!split.found) continue;

      auto mid = std::partition(
          sample_.begin() + static_cast<std::ptrdiff_t>(job.begin),
          sample_.begin() + static_cast<std::ptrdiff_t>(job.end),
          [&](std::size_t r) { return x_(r, split.feature) <= split.threshold; });
      const auto mid_index = static_cast<std::size_t>(mid - sample_.begin());

      const int left = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      const int right = static_cast<int>(nodes_.size());
      nodes_.emplace_back();
      TreeNode& node = nodes_[job.node];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left;
      node.right = right;
      stack.push_back({right, mid_index, job.end, job.depth + 1});
      stack.push_back({left, job.begin, mid_index, job.depth + 1});
    }
    return DecisionTree(std::move(nodes_));
  }

 private:
  Split FindSplit(std::size_t begin, std::size_t end, const std::vector<double>& counts) {
    const std::size_t n = end - begin;
    const auto min_leaf = static_cast<std::size_t>(config_.min_leaf_size);
    double parent = 0.0;
    for (double c : counts) parent += c * c;
    parent /= static_cast<double>(n);

    // Partial Fisher-Yates: the first mtry_ entries become the candidates.
    for (int i = 0; i < mtry_; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i),
                                                      features_.size() - 1);
      std::swap(features_[static_cast<std::size_t>(i)], features_[pick(rng_)]);
    }

    Split best;
    std::vector<std::pair<double, int>> column(n);
    std::vector<double> left(counts.size());
    for (int c = 0; c < mtry_; ++c) {
      const int f = features_[static_cast<std::size_t>(c)];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = sample_[begin + i];
        column[i] = {x_(r, f), labels_[r]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::fill(left.begin(), left.end(), 0.0);
      double left_sq = 0.0;
      double right_sq = parent * static_cast<double>(n);
      std::vector<double> right = counts;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto y = static_cast<std::size_t>(column[i].second);
        left_sq += 2.0 * left[y] + 1.0;
        left[y] += 1.0;
        right_sq -= 2.0 * right[y] - 1.0;
        right[y] -= 1.0;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf || n_right < min_leaf) continue;
        // Proportional to the decrease in Gini impurity.
        const double gain = (left_sq / static_cast<double>(n_left) +
                             right_sq / static_cast<double>(n_right) - parent) /
                            static_cast<double>(n);
        if (!(gain > 0.0)) continue;
        double threshold = 0.5 * (column[i].first + column[i + 1].first);
        if (!(threshold < column[i + 1].first)) threshold = column[i].first;
        Split candidate{true, gain, f, threshold};
        if (Better(candidate, best)) best = candidate;
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> labels_;
  int num_classes_;
  const LearnerConfig& config_;
  Rng& rng_;
  int mtry_ = 1;
  std::vector<int> features_;
  std::vector<std::size_t> sample_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

int DecisionTree::Predict(std::span<const double> x) const {
  int i = 0;
  while (nodes_[i].feature >= 0) {
    const TreeNode& node = nodes_[i];
    i = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes_[i].prediction;
}

int DecisionTree::depth() const {
  std::vector<int> depth(nodes_.size(), 0);
  int max_depth = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].feature < 0) continue;
    depth[nodes_[i].left] = depth[i] + 1;
    depth[nodes_[i].right] = depth[i] + 1;
    max_depth = std::max(max_depth, depth[i] + 1);
  }
  return max_depth;
}

RandomForest RandomForest::Fit(const Matrix& x, std::span<const int> labels, int num_classes,
                               const LearnerConfig& config) {
  config.Validate();
  if (x.rows() == 0) throw InputError("random forest needs training rows");
  if (labels.size() != x.rows()) throw InputError("label count does not match rows");
  if (num_classes < 2) throw InputError("random forest needs at least 2 classes");
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InputError("label outside class range");
  }

  RandomForest forest;
  forest.num_classes_ = num_classes;
  forest.dimension_ = x.cols();
  forest.trees_.reserve(static_cast<std::size_t>(config.num_trees));
  const std::size_t n = x.rows();
  for (int t = 0; t < config.num_trees; ++t) {
    Rng rng(DeriveSeed(config.seed, {kTagTree, static_cast<std::uint64_t>(t)}));
    std::vector<std::size_t> sample(n);
    if (config.bootstrap) {
      std::uniform_int_distribution<std::size_t> draw(0, n - 1);
      for (auto& s : sample) s = draw(rng);
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    TreeBuilder builder(x, labels, num_classes, config, rng);
    forest.trees_.push_back(builder.Build(std::move(sample)));
  }
  return forest;
}

std::vector<double> RandomForest::Probabilities(std::span<const double> x) const {
  if (x.size() != dimension_) throw InputError("feature vector has wrong length");
  std::vector<double> votes(static_cast<std::size_t>(num_classes_), 0.0);
  for (const auto& tree : trees_) votes[static_cast<std::size_t>(tree.Predict(x))] += 1.0;
  for (double& v : votes) v /= static_cast<double>(trees_.size());
  return votes;
}

double RandomForest::Probability(std::span<const double> x, int cls) const {
  if (x.size() != dimension_) throw InputError("feature vector has wrong length");
  int votes = 0;
  for (const auto& tree : trees_) votes += tree.Predict(x) == cls ? 1 : 0;
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::ToJson() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json feature = nlohmann::json::array(), threshold = nlohmann::json::array(),
                   left = nlohmann::json::array(), right = nlohmann::json::array(),
                   prediction = nlohmann::json::array();
    for (const auto& node : tree.nodes()) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      left.push_back(node.left);
      right.push_back(node.right);
      prediction.push_back(node.prediction);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"prediction", prediction}});
  }
  return {{"type", "random_forest"},
          {"num_classes", num_classes_},
          {"dimension", dimension_},
          {"trees", trees}};
}

RandomForest RandomForest::FromJson(const nlohmann::json& j) {
  RandomForest forest;
  forest.num_classes_ = j.at("num_classes").get<int>();
  forest.dimension_ = j.at("dimension").get<std::size_t>();
  for (const auto& t : j.at("trees")) {
    const auto& feature = t.at("feature");
    std::vector<TreeNode> nodes(feature.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      nodes[i].feature = feature[i].get<int>();
      nodes[i].threshold = t.at("threshold")[i].get<double>();
      nodes[i].left = t.at("left")[i].get<int>();
      nodes[i].right = t.at("right")[i].get<int>();
      nodes[i].prediction = t.at("prediction")[i].get<int>();
    }
    forest.trees_.emplace_back(std::move(nodes));
  }
  return forest;
}

}  // namespace bcops
