#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asymkit {

enum class ErrorKind {
  NonConvergence,
  NonFinite,
  ShapeMismatch,
  NonUnitary,
  ZeroTensor,
  DegenerateLeading,
  NonClustering,
  OrderExceeded,
  ClosureViolation,
  NonAbelian,
  ProductNotIdentity,
  TermCapExceeded,
  MCVarianceTooLarge,
  FitIllConditioned,
  BadParam,
  CriticalRegime,
  CapExceeded,
  DecompositionFailed,
  StructureViolation,
  Config,
};

std::string_view to_string(ErrorKind kind);

// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace asymkit
