#ifndef BCOPS_SIMULATE_H_
#define BCOPS_SIMULATE_H_

#include <cstdint>
#include <vector>

#include "bcops/dataset.h"

namespace bcops {

// Independent-coordinate Gaussian component.
struct GaussianComponent {
  std::vector<double> means;
  std::vector<double> sds;
};

struct SyntheticSpec {
  // One component per observed class; class k is classes[k-1].
  std::vector<GaussianComponent> classes;
  GaussianComponent outlier;
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
  std::size_t test_outliers = 0;
  std::uint64_t seed = 0;
};

struct SimulatedData {
  Dataset train;
  // Unlabeled test features.
  Dataset test;
  // Ground-truth test labels including kOutlierClass.
  std::vector<ClassId> truth;

  // Test set with the truth attached as labels.
  Dataset LabeledTest() const;
};

SimulatedData GenerateMixture(const SyntheticSpec& spec);

// Two classes in R^10 differing in x1, outliers shifted in x2; 500/500
// training and 500/500/500 test rows. The class-2 spread parameter 0.5 is
// read as a standard deviation unless variance_parameterization is set, in
// which case the SD is sqrt(0.5).
SyntheticSpec TwoClassSimSpec(std::uint64_t seed,
                           bool variance_parameterization = false);
SimulatedData GenerateTwoClassSim(std::uint64_t seed,
                               bool variance_parameterization = false);

}  // namespace bcops

#endif  // BCOPS_SIMULATE_H_
