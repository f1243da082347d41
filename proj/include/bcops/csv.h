#ifndef BCOPS_CSV_H_
#define BCOPS_CSV_H_

#include <optional>
#include <string>
#include <vector>

#include "bcops/dataset.h"

namespace bcops {

struct CsvReadOptions {
  // Column holding class labels. Absent means the file is unlabeled.
  std::optional<std::string> label_column;
  // Fixed label vocabulary (id k = vocabulary[k-1]). When empty, ids are
  // assigned in lexicographic order of the distinct non-"R" labels.
  std::vector<std::string> vocabulary;
  // Treat label_column as optional: load unlabeled when the header lacks it.
  bool label_column_optional = false;
};

// Reads a header-first, comma-separated file. Lines starting with '#' before
// the header are treated as comments. Throws CsvError.
Dataset LoadCsv(const std::string& path, const CsvReadOptions& options = {});

// Writes features (columns x1..xp) plus, when labels are present, a label
// column with class names ("R" for outliers). Leading comment lines are
// written verbatim, each prefixed with "# ".
void SaveCsv(const Dataset& dataset, const std::string& path,
             const std::string& label_column = "label",
             const std::vector<std::string>& comments = {});

// Shortest round-trip decimal representation.
std::string FormatDouble(double value);

}  // namespace bcops

#endif  // BCOPS_CSV_H_
