#pragma once

#include <stdexcept>
#include <string>

namespace trialkit {

// Error taxonomy. The CLI maps categories to exit statuses:
// validation -> 2, infeasible -> 3, scale -> 4.
enum class ErrorKind {
  out_of_range,
  empty_table,
  bad_attrition,
  missing_assignment,
  missing_potential_outcome,
  missing_nstar,
  mismatched_q,
  non_integral_rates,
  cap_exceeded,
  variance_unavailable,
  zero_mass,
  calibration_failed,
  shape_mismatch,
  bad_config,
  alpha_infeasible,
  infeasible_constraints,
  space_too_large,
  degenerate_window,
};

enum class ErrorCategory { validation, infeasible, scale };

constexpr ErrorCategory category_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::alpha_infeasible:
    case ErrorKind::infeasible_constraints:
      return ErrorCategory::infeasible;
    case ErrorKind::space_too_large:
    case ErrorKind::degenerate_window:
      return ErrorCategory::scale;
    default:
      return ErrorCategory::validation;
  }
}

constexpr int exit_status_of(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::infeasible:
      return 3;
    case ErrorCategory::scale:
      return 4;
    case ErrorCategory::validation:
      return 2;
  }
  return 2;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  ErrorCategory category() const { return category_of(kind_); }
  int exit_status() const { return exit_status_of(category()); }

 private:
  ErrorKind kind_;
};

}  // namespace trialkit
