#ifndef BCOPS_DATASET_H_
#define BCOPS_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bcops/matrix.h"

namespace bcops {

// Class ids are 1..K. The outlier class R, which appears only in ground-truth
// test labels, is encoded as kOutlierClass.
using ClassId = int;
inline constexpr ClassId kOutlierClass = 0;
inline constexpr char kOutlierName[] = "R";

// Feature matrix with optional labels. The universal sample container.
struct Dataset {
  Matrix features;
  std::optional<std::vector<ClassId>> labels;
  int class_count = 2;
  // Display name of class k at index k-1; defaults to "1".."K".
  std::vector<std::string> class_names;

  std::size_t size() const { return features.rows(); }
  std::size_t dimension() const { return features.cols(); }
  bool has_labels() const { return labels.has_value(); }
  std::span<const double> row(std::size_t i) const { return features.row(i); }
  ClassId label(std::size_t i) const { return (*labels)[i]; }
  const std::string& ClassName(ClassId k) const;
  bool HasOutlierLabels() const;
};

// Validates and assembles a dataset; throws InputError on any violated
// invariant. Empty datasets are only accepted with allow_empty.
Dataset MakeDataset(Matrix features, std::optional<std::vector<ClassId>> labels,
                    int class_count, std::vector<std::string> class_names = {},
                    bool allow_empty = false);

// Throws unless the dataset is labeled with no outlier labels.
void RequireTrainingLabels(const Dataset& dataset);

// Rows in the given order. Result may be empty.
Dataset Subset(const Dataset& dataset, std::span<const std::size_t> rows);

// Rows with label k, order preserved.
Dataset ClassSubset(const Dataset& dataset, ClassId k);

// Row indices with label k.
std::vector<std::size_t> ClassRows(const Dataset& dataset, ClassId k);

std::vector<std::size_t> ClassCounts(const Dataset& dataset);

// Two-fold partition of rows. fold_of[i] is 1 or 2.
struct FoldSplit {
  std::vector<int> fold_of;
  std::uint64_t seed = 0;

  std::vector<std::size_t> Rows(int fold) const;
  std::size_t FoldSize(int fold) const;
};

// Random ~50/50 split. Stratified splits keep every class within one sample
// of even across folds and alternate the odd extra sample between folds.
// Unstratified splits keep identical rows in the same fold.
FoldSplit SplitHalf(const Dataset& dataset, bool stratify, std::uint64_t seed);

// Unstratified split of `dataset` that places any row identical to a row of
// `reference` in that row's fold, then balances the remainder.
FoldSplit SplitHalfAligned(const Dataset& dataset, std::uint64_t seed, const Dataset& reference,
                           const FoldSplit& reference_split);

inline int OtherFold(int fold) { return 3 - fold; }

}  // namespace bcops

#endif  // BCOPS_DATASET_H_
