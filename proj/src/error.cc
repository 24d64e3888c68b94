#include "photoba/error.h"

namespace photoba {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return "config";
    case ErrorKind::kIo:
      return "io";
    case ErrorKind::kParse:
      return "parse";
    case ErrorKind::kInvalidPerturbation:
      return "invalid-perturbation";
    case ErrorKind::kInvalidDepth:
      return "invalid-depth";
    case ErrorKind::kSingularJacobian:
      return "singular-jacobian";
    case ErrorKind::kUnderConstrained:
      return "under-constrained";
    case ErrorKind::kNoAssociation:
      return "no-association";
    case ErrorKind::kDegenerateAlignment:
      return "degenerate-alignment";
  }
  return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace photoba
