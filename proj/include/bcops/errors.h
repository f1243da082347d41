#ifndef BCOPS_ERRORS_H_
#define BCOPS_ERRORS_H_

#include <stdexcept>
#include <string>

namespace bcops {

// Bad user input: arguments, files, or data that violate a precondition.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical routine or learner failed on otherwise valid input.
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CsvError : public InputError {
 public:
  enum class Code {
    kMissingFile,
    kEmptyFile,
    kNonNumericCell,
    kUnknownLabelColumn,
    kRaggedRow,
    kUnknownLabel,
  };

  CsvError(Code code, const std::string& message)
      : InputError(message), code_(code) {}

  Code code() const { return code_; }

 private:
  Code code_;
};

}  // namespace bcops

#endif  // BCOPS_ERRORS_H_
