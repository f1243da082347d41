#ifndef BCOPS_METHODS_H_
#define BCOPS_METHODS_H_

#include <cstdint>
#include <functional>
#include <memory>

#include "bcops/conformal.h"
#include "bcops/dataset.h"
#include "bcops/learners.h"

namespace bcops {

// Weighting mu = f_test. Training and test data are each split in two;
// for every class k and fold t a class-k-vs-test classifier is trained on
// fold t and calibrated on the class-k training rows of the other fold.
// Requires >= 4 training rows per class and >= 4 test rows.
PredictionSetModel FitBcops(const Dataset& train, const Dataset& test,
                            const LearnerConfig& learner, std::uint64_t seed);

// Weighting mu = 1. Per class, a product-kernel density is fit on half the
// class rows and calibrated on the other half; the score is log density.
PredictionSetModel FitDls(const Dataset& train, std::uint64_t seed);

// Weighting mu = f. A K-class model is fit on a stratified half of the
// training data and calibrated per class on the other half.
PredictionSetModel FitIrs(const Dataset& train, const LearnerConfig& learner, std::uint64_t seed);

// Fits a score function separating `pos` from `neg`.
using BinaryFitter = std::function<std::shared_ptr<const ScoreFunction>(
    const Dataset& pos, const Dataset& neg, std::uint64_t seed)>;

BinaryFitter LearnerFitter(const LearnerConfig& learner);

// Data-augmentation variant: for each class k refits a classifier separating
// (class k U {x}) from (test \ {x}), then ranks x among the class-k rows.
// Costs K refits per query.
PredictionSet BcopsFullConformal(const Dataset& train, const Dataset& test, std::size_t x_index,
                                 const BinaryFitter& fitter, double alpha, std::uint64_t seed);
PredictionSet BcopsFullConformal(const Dataset& train, const Dataset& test, std::size_t x_index,
                                 const LearnerConfig& learner, double alpha, std::uint64_t seed);

}  // namespace bcops

#endif  // BCOPS_METHODS_H_
