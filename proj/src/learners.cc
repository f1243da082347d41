#include "bcops/learners.h"

#include <algorithm>
#include <cmath>

#include "bcops/errors.h"

namespace bcops {

std::string LearnerKindName(LearnerKind kind) {
  return kind == LearnerKind::kRandomForest ? "rf" : "glm";
}

LearnerKind ParseLearnerKind(const std::string& name) {
  if (name == "rf") return LearnerKind::kRandomForest;
  if (name == "glm") return LearnerKind::kLogistic;
  throw InputError("unknown learner '" + name + "' (expected rf or glm)");
}

void LearnerConfig::Validate() const {
  if (num_trees < 1) throw InputError("tree count must be >= 1");
  if (max_depth < 0) throw InputError("max depth must be >= 0 (0 = unlimited)");
  if (min_leaf_size < 1) throw InputError("min leaf size must be >= 1");
  if (features_per_split < 0) throw InputError("features per split must be >= 0");
  if (!(l2 >= 0.0) || !(l1 >= 0.0)) throw InputError("penalties must be >= 0");
  if (max_iterations < 1) throw InputError("max iterations must be >= 1");
  if (!(tolerance > 0.0)) throw InputError("tolerance must be positive");
}

nlohmann::json LearnerConfig::ToJson() const {
  return {{"kind", LearnerKindName(kind)},
          {"num_trees", num_trees},
          {"max_depth", max_depth},
          {"min_leaf_size", min_leaf_size},
          {"features_per_split", features_per_split},
          {"bootstrap", bootstrap},
          {"l2", l2},
          {"l1", l1},
          {"max_iterations", max_iterations},
          {"tolerance", tolerance},
          {"seed", seed}};
}

LearnerConfig LearnerConfig::FromJson(const nlohmann::json& j) {
  LearnerConfig c;
  c.kind = ParseLearnerKind(j.at("kind").get<std::string>());
  c.num_trees = j.at("num_trees").get<int>();
  c.max_depth = j.at("max_depth").get<int>();
  c.min_leaf_size = j.at("min_leaf_size").get<int>();
  c.features_per_split = j.at("features_per_split").get<int>();
  c.bootstrap = j.at("bootstrap").get<bool>();
  c.l2 = j.at("l2").get<double>();
  c.l1 = j.at("l1").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.tolerance = j.at("tolerance").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

double ClippedLogit(double p) {
  constexpr double kClip = 1e-6;
  const double q = std::clamp(p, kClip, 1.0 - kClip);
  return std::log(q / (1.0 - q));
}

// ---------------------------------------------------------------------------
// Binary scorer

double BinaryScorer::Score(std::span<const double> x) const {
  if (const auto* forest = std::get_if<RandomForest>(&model_)) return forest->Probability(x, 1);
  return std::get<LogisticModel>(model_).Probabilities(x)[1];
}

std::size_t BinaryScorer::dimension() const {
  return std::visit([](const auto& m) { return m.dimension(); }, model_);
}

LearnerKind BinaryScorer::kind() const {
  return std::holds_alternative<RandomForest>(model_) ? LearnerKind::kRandomForest
                                                      : LearnerKind::kLogistic;
}

nlohmann::json BinaryScorer::ToJson() const {
  return {{"type", "binary"},
          {"model", std::visit([](const auto& m) { return m.ToJson(); }, model_)},
          {"positives", metadata_.positives},
          {"negatives", metadata_.negatives},
          {"seed", metadata_.seed},
          {"weighting", metadata_.weighting}};
}

namespace {

std::variant<RandomForest, LogisticModel> ModelFromJson(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "random_forest") return RandomForest::FromJson(j);
  if (type == "logistic") return LogisticModel::FromJson(j);
  throw InputError("unknown model type '" + type + "'");
}

}  // namespace

BinaryScorer BinaryScorer::FromJson(const nlohmann::json& j) {
  Metadata meta;
  meta.positives = j.at("positives").get<std::size_t>();
  meta.negatives = j.at("negatives").get<std::size_t>();
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.weighting = j.at("weighting").get<std::string>();
  return BinaryScorer(ModelFromJson(j.at("model")), std::move(meta));
}

BinaryScorer FitBinary(const Dataset& pos, const Dataset& neg, const LearnerConfig& config) {
  config.Validate();
  if (pos.dimension() != neg.dimension()) {
    throw InputError("positive and negative sets differ in dimension");
  }
  if (pos.size() < 2 || neg.size() < 2) {
    throw InputError("binary fit needs at least 2 samples on each side");
  }
  Matrix x(0, pos.dimension());
  for (std::size_t i = 0; i < pos.size(); ++i) x.AppendRow(pos.row(i));
  for (std::size_t i = 0; i < neg.size(); ++i) x.AppendRow(neg.row(i));
  std::vector<int> labels(pos.size(), 1);
  labels.insert(labels.end(), neg.size(), 0);

  BinaryScorer::Metadata meta{pos.size(), neg.size(), config.seed, ""};
  if (config.kind == LearnerKind::kRandomForest) {
    meta.weighting = "none";
    return BinaryScorer(RandomForest::Fit(x, labels, 2, config), std::move(meta));
  }
  const double n = static_cast<double>(x.rows());
  std::vector<double> weights(pos.size(), n / (2.0 * static_cast<double>(pos.size())));
  weights.insert(weights.end(), neg.size(), n / (2.0 * static_cast<double>(neg.size())));
  meta.weighting = "inverse-frequency";
  return BinaryScorer(LogisticModel::FitBinary(x, labels, weights, config), std::move(meta));
}

// ---------------------------------------------------------------------------
// Multiclass scorer

std::vector<double> MulticlassScorer::Probabilities(std::span<const double> x) const {
  return std::visit([&](const auto& m) { return m.Probabilities(x); }, model_);
}

int MulticlassScorer::num_classes() const {
  return std::visit([](const auto& m) { return m.num_classes(); }, model_);
}

std::size_t MulticlassScorer::dimension() const {
  return std::visit([](const auto& m) { return m.dimension(); }, model_);
}

nlohmann::json MulticlassScorer::ToJson() const {
  return {{"type", "multiclass"},
          {"model", std::visit([](const auto& m) { return m.ToJson(); }, model_)}};
}

MulticlassScorer MulticlassScorer::FromJson(const nlohmann::json& j) {
  return MulticlassScorer(ModelFromJson(j.at("model")));
}

MulticlassScorer FitMulticlass(const Dataset& train, const LearnerConfig& config) {
  config.Validate();
  RequireTrainingLabels(train);
  if (train.class_count < 2) throw InputError("multiclass fit needs at least 2 classes");
  const auto counts = ClassCounts(train);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 2) {
      throw InputError("class " + train.class_names[k] + " has fewer than 2 samples");
    }
  }
  std::vector<int> labels(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) labels[i] = train.label(i) - 1;
  if (config.kind == LearnerKind::kRandomForest) {
    return MulticlassScorer(RandomForest::Fit(train.features, labels, train.class_count, config));
  }
  return MulticlassScorer(
      LogisticModel::FitMultinomial(train.features, labels, train.class_count, config));
}

double ClassProbabilityScore::Score(std::span<const double> x) const {
  return model_->Probabilities(x)[static_cast<std::size_t>(class_id_ - 1)];
}

nlohmann::json ClassProbabilityScore::ToJson() const {
  return {{"type", "class_probability"}, {"class", class_id_}, {"model", model_->ToJson()}};
}

nlohmann::json LogDensityScore::ToJson() const {
  return {{"type", "log_density"}, {"density", density_.ToJson()}};
}

KernelDensity FitKdeMulti(const Dataset& data) { return KernelDensity::Fit(data.features); }

std::shared_ptr<const ScoreFunction> ScoreFunctionFromJson(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "binary") return std::make_shared<BinaryScorer>(BinaryScorer::FromJson(j));
  if (type == "class_probability") {
    auto model = std::make_shared<MulticlassScorer>(MulticlassScorer::FromJson(j.at("model")));
    return std::make_shared<ClassProbabilityScore>(std::move(model), j.at("class").get<int>());
  }
  if (type == "log_density") {
    return std::make_shared<LogDensityScore>(KernelDensity::FromJson(j.at("density")));
  }
  throw InputError("unknown score function type '" + type + "'");
}

}  // namespace bcops
