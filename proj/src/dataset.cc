#include "bcops/dataset.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "bcops/errors.h"
#include "bcops/random.h"

namespace bcops {

const std::string& Dataset::ClassName(ClassId k) const {
  static const std::string outlier = kOutlierName;
  if (k == kOutlierClass) return outlier;
  return class_names.at(static_cast<std::size_t>(k - 1));
}

bool Dataset::HasOutlierLabels() const {
  if (!labels) return false;
  return std::find(labels->begin(), labels->end(), kOutlierClass) != labels->end();
}

Dataset MakeDataset(Matrix features, std::optional<std::vector<ClassId>> labels,
                    int class_count, std::vector<std::string> class_names,
                    bool allow_empty) {
  if (class_count < 1) throw InputError("class count must be at least 1");
  if (features.cols() < 1) throw InputError("dataset needs at least one feature");
  if (!allow_empty && features.rows() < 1) throw InputError("dataset is empty");
  for (double v : features.data()) {
    if (!std::isfinite(v)) throw InputError("dataset contains a non-finite feature");
  }
  if (labels) {
    if (labels->size() != features.rows()) {
      throw InputError("label count does not match row count");
    }
    for (ClassId y : *labels) {
      if (y != kOutlierClass && (y < 1 || y > class_count)) {
        throw InputError("label " + std::to_string(y) + " outside 1.." +
                         std::to_string(class_count));
      }
    }
  }
  if (class_names.empty()) {
    for (int k = 1; k <= class_count; ++k) class_names.push_back(std::to_string(k));
  }
  if (class_names.size() != static_cast<std::size_t>(class_count)) {
    throw InputError("class name count does not match class count");
  }
  Dataset d;
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.class_count = class_count;
  d.class_names = std::move(class_names);
  return d;
}

void RequireTrainingLabels(const Dataset& dataset) {
  if (!dataset.has_labels()) throw InputError("training data must be labeled");
  if (dataset.HasOutlierLabels()) {
    throw InputError("training data may not contain outlier (R) labels");
  }
}

Dataset Subset(const Dataset& dataset, std::span<const std::size_t> rows) {
  Dataset out;
  out.features = Matrix(0, dataset.dimension());
  for (std::size_t r : rows) out.features.AppendRow(dataset.row(r));
  if (dataset.labels) {
    std::vector<ClassId> labels;
    labels.reserve(rows.size());
    for (std::size_t r : rows) labels.push_back(dataset.label(r));
    out.labels = std::move(labels);
  }
  out.class_count = dataset.class_count;
  out.class_names = dataset.class_names;
  return out;
}

std::vector<std::size_t> ClassRows(const Dataset& dataset, ClassId k) {
  if (!dataset.has_labels()) throw InputError("class subset of an unlabeled dataset");
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset.label(i) == k) rows.push_back(i);
  }
  return rows;
}

Dataset ClassSubset(const Dataset& dataset, ClassId k) {
  const auto rows = ClassRows(dataset, k);
  return Subset(dataset, rows);
}

std::vector<std::size_t> ClassCounts(const Dataset& dataset) {
  if (!dataset.has_labels()) throw InputError("class counts of an unlabeled dataset");
  std::vector<std::size_t> counts(static_cast<std::size_t>(dataset.class_count), 0);
  for (ClassId y : *dataset.labels) {
    if (y != kOutlierClass) ++counts[static_cast<std::size_t>(y - 1)];
  }
  return counts;
}

std::vector<std::size_t> FoldSplit::Rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) rows.push_back(i);
  }
  return rows;
}

std::size_t FoldSplit::FoldSize(int fold) const {
  return static_cast<std::size_t>(std::count(fold_of.begin(), fold_of.end(), fold));
}

namespace {

using RowKey = std::vector<double>;

RowKey KeyOf(const Dataset& dataset, std::size_t i) {
  const auto row = dataset.row(i);
  return RowKey(row.begin(), row.end());
}

// Unstratified half split in which identical rows share a fold, so no fold
// sees a copy of another fold's row. pinned[i] (1 or 2) fixes a row's fold;
// an empty vector pins nothing. Without duplicates or pins this is a plain
// shuffled half split.
void GroupedSplit(const Dataset& dataset, const std::vector<int>& pinned, Rng& rng,
                  FoldSplit& split) {
  const std::size_t n = dataset.size();
  std::map<RowKey, std::size_t> group_of;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<int> group_pin;
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = group_of.try_emplace(KeyOf(dataset, i), groups.size());
    if (inserted) {
      groups.emplace_back();
      group_pin.push_back(0);
    }
    groups[it->second].push_back(i);
    if (!pinned.empty() && pinned[i] != 0 && group_pin[it->second] == 0) {
      group_pin[it->second] = pinned[i];
    }
  }

  const bool extra_to_first = std::bernoulli_distribution(0.5)(rng);
  const std::size_t first = n / 2 + ((n % 2 == 1 && extra_to_first) ? 1 : 0);
  std::size_t in_first = 0;
  std::vector<std::size_t> free_groups;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (group_pin[g] == 0) {
      free_groups.push_back(g);
      continue;
    }
    for (std::size_t i : groups[g]) split.fold_of[i] = group_pin[g];
    if (group_pin[g] == 1) in_first += groups[g].size();
  }
  std::shuffle(free_groups.begin(), free_groups.end(), rng);
  for (std::size_t g : free_groups) {
    const int fold = in_first < first ? 1 : 2;
    for (std::size_t i : groups[g]) split.fold_of[i] = fold;
    if (fold == 1) in_first += groups[g].size();
  }
  if (split.FoldSize(1) == 0 || split.FoldSize(2) == 0) {
    throw InputError("rows are too heavily duplicated to split into two folds");
  }
}

}  // namespace

FoldSplit SplitHalf(const Dataset& dataset, bool stratify, std::uint64_t seed) {
  const std::size_t n = dataset.size();
  if (n < 2) throw InputError("split needs at least 2 rows");
  Rng rng(seed);
  FoldSplit split;
  split.seed = seed;
  split.fold_of.assign(n, 0);

  // Shuffle a group and put its first half (plus the odd extra when
  // extra_to_first) in fold 1.
  auto assign = [&](std::vector<std::size_t> group, bool extra_to_first) {
    std::shuffle(group.begin(), group.end(), rng);
    const std::size_t first = group.size() / 2 + ((group.size() % 2 == 1 && extra_to_first) ? 1 : 0);
    for (std::size_t i = 0; i < group.size(); ++i) {
      split.fold_of[group[i]] = i < first ? 1 : 2;
    }
  };

  if (!stratify) {
    GroupedSplit(dataset, {}, rng, split);
    return split;
  }

  RequireTrainingLabels(dataset);
  bool extra_to_first = std::bernoulli_distribution(0.5)(rng);
  for (ClassId k = 1; k <= dataset.class_count; ++k) {
    auto rows = ClassRows(dataset, k);
    if (rows.empty()) continue;
    if (rows.size() < 2) {
      throw InputError("class " + dataset.ClassName(k) +
                       " has fewer than 2 samples; cannot stratify");
    }
    const bool odd = rows.size() % 2 == 1;
    assign(std::move(rows), extra_to_first);
    if (odd) extra_to_first = !extra_to_first;
  }
  return split;
}


FoldSplit SplitHalfAligned(const Dataset& dataset, std::uint64_t seed, const Dataset& reference,
                           const FoldSplit& reference_split) {
  const std::size_t n = dataset.size();
  if (n < 2) throw InputError("split needs at least 2 rows");
  if (reference_split.fold_of.size() != reference.size()) {
    throw InputError("reference split does not match the reference data");
  }
  std::map<RowKey, int> reference_fold;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    reference_fold.try_emplace(KeyOf(reference, i), reference_split.fold_of[i]);
  }
  std::vector<int> pinned(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = reference_fold.find(KeyOf(dataset, i));
    if (it != reference_fold.end()) pinned[i] = it->second;
  }
  Rng rng(seed);
  FoldSplit split;
  split.seed = seed;
  split.fold_of.assign(n, 0);
  GroupedSplit(dataset, pinned, rng, split);
  return split;
}

}  // namespace bcops
