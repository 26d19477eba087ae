#include "stresslab/error.hpp"

namespace stresslab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "invalid-input";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::DegenerateConfiguration: return "degenerate-configuration";
    case ErrorCode::UndefinedMetric: return "undefined-metric";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::SolverFailure: return "solver-failure";
    case ErrorCode::VerificationFailed: return "verification-failed";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

namespace {
std::string compose(ErrorCode code, const std::string& message, const std::string& stage) {
  std::string out;
  if (!stage.empty()) out += "[" + stage + "] ";
  out += std::string(to_string(code)) + ": " + message;
  return out;
}
}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::string stage)
    : std::runtime_error(compose(code, message, stage)),
      code_(code),
      stage_(std::move(stage)),
      detail_(message) {}

Error Error::with_stage(const std::string& stage) const {
  if (!stage_.empty()) return *this;
  return Error(code_, detail_, stage);
}

}  // namespace stresslab
