#pragma once

#include <stdexcept>
#include <string>

namespace bsdelab {

/// Error thrown by numerical routines. Carries enough context (module,
/// time node, state) to locate the offending step.
class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bsdelab
