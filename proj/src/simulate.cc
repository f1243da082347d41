#include "bcops/simulate.h"

#include <cmath>

#include "bcops/errors.h"
#include "bcops/random.h"

namespace bcops {
namespace {

void Draw(const GaussianComponent& c, std::size_t count, Rng& rng, Matrix* out) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> row(c.means.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      row[j] = c.means[j] + c.sds[j] * normal(rng);
    }
    out->AppendRow(row);
  }
}

void Validate(const GaussianComponent& c, std::size_t p) {
  if (c.means.size() != p || c.sds.size() != p) {
    throw InputError("component dimension mismatch");
  }
  for (double sd : c.sds) {
    if (!(sd > 0.0)) throw InputError("component standard deviations must be positive");
  }
}

}  // namespace

Dataset SimulatedData::LabeledTest() const {
  Dataset d = test;
  d.labels = truth;
  return d;
}

SimulatedData GenerateMixture(const SyntheticSpec& spec) {
  const std::size_t k_count = spec.classes.size();
  if (k_count < 1) throw InputError("mixture needs at least one class");
  if (spec.train_counts.size() != k_count || spec.test_counts.size() != k_count) {
    throw InputError("per-class counts must match the class list");
  }
  const std::size_t p = spec.classes[0].means.size();
  for (const auto& c : spec.classes) Validate(c, p);
  if (spec.test_outliers > 0) Validate(spec.outlier, p);

  Rng train_rng(DeriveSeed(spec.seed, {kTagSimulation, 1}));
  Rng test_rng(DeriveSeed(spec.seed, {kTagSimulation, 2}));

  Matrix train(0, p);
  std::vector<ClassId> train_labels;
  for (std::size_t k = 0; k < k_count; ++k) {
    Draw(spec.classes[k], spec.train_counts[k], train_rng, &train);
    train_labels.insert(train_labels.end(), spec.train_counts[k], static_cast<ClassId>(k + 1));
  }
  Matrix test(0, p);
  std::vector<ClassId> truth;
  for (std::size_t k = 0; k < k_count; ++k) {
    Draw(spec.classes[k], spec.test_counts[k], test_rng, &test);
    truth.insert(truth.end(), spec.test_counts[k], static_cast<ClassId>(k + 1));
  }
  Draw(spec.outlier, spec.test_outliers, test_rng, &test);
  truth.insert(truth.end(), spec.test_outliers, kOutlierClass);

  const int k = static_cast<int>(k_count);
  SimulatedData data;
  data.train = MakeDataset(std::move(train), std::move(train_labels), k);
  data.test = MakeDataset(std::move(test), std::nullopt, k);
  data.truth = std::move(truth);
  return data;
}

SyntheticSpec TwoClassSimSpec(std::uint64_t seed, bool variance_parameterization) {
  constexpr std::size_t kDim = 10;
  GaussianComponent standard{std::vector<double>(kDim, 0.0), std::vector<double>(kDim, 1.0)};
  SyntheticSpec spec;
  spec.classes = {standard, standard};
  spec.classes[1].means[0] = 3.0;
  spec.classes[1].sds[0] = variance_parameterization ? std::sqrt(0.5) : 0.5;
  spec.outlier = standard;
  spec.outlier.means[1] = 3.0;
  spec.train_counts = {500, 500};
  spec.test_counts = {500, 500};
  spec.test_outliers = 500;
  spec.seed = seed;
  return spec;
}

SimulatedData GenerateTwoClassSim(std::uint64_t seed, bool variance_parameterization) {
  return GenerateMixture(TwoClassSimSpec(seed, variance_parameterization));
}

}  // namespace bcops
