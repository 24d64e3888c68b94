#pragma once

#include <stdexcept>
#include <string>

namespace photoba {

// Error families. The CLI maps each family to its own exit code.
enum class ErrorKind {
  kConfig,
  kIo,
  kParse,
  kInvalidPerturbation,
  kInvalidDepth,
  kSingularJacobian,
  kUnderConstrained,
  kNoAssociation,
  kDegenerateAlignment,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace photoba
