#include "bcops/csv.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "bcops/errors.h"

namespace bcops {
namespace {

std::string Trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  s = s.substr(b, e - b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::vector<std::string> SplitFields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(Trim(std::string_view(line).substr(start)));
      break;
    }
    fields.push_back(Trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool ParseFinite(const std::string& cell, double* out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end && std::isfinite(*out);
}

}  // namespace

std::string FormatDouble(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

Dataset LoadCsv(const std::string& path, const CsvReadOptions& options) {
  if (!std::filesystem::is_regular_file(path)) {
    throw CsvError(CsvError::Code::kMissingFile, "no such file: " + path);
  }
  std::ifstream in(path);
  if (!in) throw CsvError(CsvError::Code::kMissingFile, "cannot open " + path);

  std::string line;
  std::vector<std::string> header;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    first = false;
    if (Trim(line).empty() || line[0] == '#') continue;
    header = SplitFields(line);
    break;
  }
  if (header.empty()) {
    throw CsvError(CsvError::Code::kEmptyFile, "empty file: " + path);
  }

  std::optional<std::size_t> label_index;
  if (options.label_column) {
    auto it = std::find(header.begin(), header.end(), *options.label_column);
    if (it != header.end()) {
      label_index = static_cast<std::size_t>(it - header.begin());
    } else if (!options.label_column_optional) {
      throw CsvError(CsvError::Code::kUnknownLabelColumn,
                     "label column '" + *options.label_column + "' not in " + path);
    }
  }
  const std::size_t width = header.size();
  const std::size_t p = width - (label_index ? 1 : 0);
  if (p == 0) throw CsvError(CsvError::Code::kEmptyFile, "no feature columns in " + path);

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    auto fields = SplitFields(line);
    if (fields.size() != width) {
      throw CsvError(CsvError::Code::kRaggedRow,
                     path + ":" + std::to_string(line_no) + ": expected " +
                         std::to_string(width) + " fields, got " +
                         std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      if (label_index && j == *label_index) {
        raw_labels.push_back(fields[j]);
        continue;
      }
      double v;
      if (!ParseFinite(fields[j], &v)) {
        throw CsvError(CsvError::Code::kNonNumericCell,
                       path + ":" + std::to_string(line_no) + ": non-numeric cell '" +
                           fields[j] + "' in column " + header[j]);
      }
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw CsvError(CsvError::Code::kEmptyFile, "no data rows in " + path);

  Matrix features(rows, p, std::move(values));
  if (!label_index) {
    const int k = options.vocabulary.empty() ? 2 : static_cast<int>(options.vocabulary.size());
    return MakeDataset(std::move(features), std::nullopt, k, options.vocabulary);
  }

  std::vector<std::string> vocabulary = options.vocabulary;
  if (vocabulary.empty()) {
    std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
    distinct.erase(kOutlierName);
    vocabulary.assign(distinct.begin(), distinct.end());
  }
  if (vocabulary.empty()) {
    throw CsvError(CsvError::Code::kUnknownLabel, "no class labels other than R in " + path);
  }
  std::map<std::string, ClassId> ids;
  for (std::size_t k = 0; k < vocabulary.size(); ++k) {
    ids[vocabulary[k]] = static_cast<ClassId>(k + 1);
  }
  std::vector<ClassId> labels;
  labels.reserve(rows);
  for (const auto& s : raw_labels) {
    if (s == kOutlierName) {
      labels.push_back(kOutlierClass);
      continue;
    }
    auto it = ids.find(s);
    if (it == ids.end()) {
      throw CsvError(CsvError::Code::kUnknownLabel, "label '" + s + "' not in vocabulary");
    }
    labels.push_back(it->second);
  }
  const int k = static_cast<int>(vocabulary.size());
  return MakeDataset(std::move(features), std::move(labels), k, std::move(vocabulary));
}

void SaveCsv(const Dataset& dataset, const std::string& path,
             const std::string& label_column,
             const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& c : comments) out << "# " << c << '\n';
  for (std::size_t j = 0; j < dataset.dimension(); ++j) {
    if (j > 0) out << ',';
    out << 'x' << (j + 1);
  }
  if (dataset.has_labels()) out << ',' << label_column;
  out << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto row = dataset.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j > 0) out << ',';
      out << FormatDouble(row[j]);
    }
    if (dataset.has_labels()) out << ',' << dataset.ClassName(dataset.label(i));
    out << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

}  // namespace bcops
