#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stresslab {

enum class ErrorCode {
  InvalidInput,
  DimensionMismatch,
  DegenerateConfiguration,
  UndefinedMetric,
  Infeasible,
  SolverFailure,
  VerificationFailed,
  Io,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `stage` names the pipeline step that failed
/// (empty for errors raised outside a pipeline).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

  /// Same error re-tagged with a pipeline stage; an existing tag is kept.
  Error with_stage(const std::string& stage) const;

 private:
  ErrorCode code_;
  std::string stage_;
  std::string detail_;
};

}  // namespace stresslab
