#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "trialkit/errors.hpp"

namespace trialkit {

// Documented equality tolerance for rates stored as binary floating point.
inline constexpr double kRateTolerance = 1e-12;

// A unit-interval value. Success rates, randomization probabilities,
// preference fractions and affected proportions all live here.
class Proportion {
 public:
  Proportion() = default;

  explicit Proportion(double value, std::string_view field = "proportion")
      : value_(value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      std::ostringstream msg;
      msg << field << " = " << value << " is outside [0, 1]";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
  }

  double value() const { return value_; }

  friend bool operator==(Proportion a, Proportion b) { return a.value_ == b.value_; }

 private:
  double value_ = 0.0;
};

inline Proportion make_proportion(double x, std::string_view field = "proportion") {
  return Proportion(x, field);
}

// Accepts values that stray outside [0, 1] by no more than `slack` and clamps
// them back. Derived quantities (complements, sums of table cells) land here.
inline Proportion clamped_proportion(double x, std::string_view field = "proportion",
                                     double slack = kRateTolerance) {
  if (x < 0.0 && x >= -slack) x = 0.0;
  if (x > 1.0 && x <= 1.0 + slack) x = 1.0;
  return Proportion(x, field);
}

// Observed success rates of a two-arm study.
struct RatePair {
  Proportion r_j;
  Proportion r_k;
};

// Joint distribution of the two binary potential outcomes:
// s both respond, t neither responds, u only arm k, v only arm j.
class ResponseTable {
 public:
  ResponseTable(double s, double t, double u, double v) : s_(s), t_(t), u_(u), v_(v) {
    Proportion(s, "s");
    Proportion(t, "t");
    Proportion(u, "u");
    Proportion(v, "v");
    const double total = s + t + u + v;
    if (std::fabs(total - 1.0) > kRateTolerance) {
      std::ostringstream msg;
      msg << "response table cells sum to " << total << ", expected 1";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
  }

  double s() const { return s_; }
  double t() const { return t_; }
  double u() const { return u_; }
  double v() const { return v_; }

  Proportion r_k() const { return clamped_proportion(s_ + u_, "r_k"); }
  Proportion r_j() const { return clamped_proportion(s_ + v_, "r_j"); }

  // Affected proportion: the fraction whose two potential outcomes differ.
  Proportion alpha() const { return clamped_proportion(u_ + v_, "alpha"); }

 private:
  double s_, t_, u_, v_;
};

inline ResponseTable response_table_from_counts(std::int64_t s_count, std::int64_t t_count,
                                                std::int64_t u_count, std::int64_t v_count) {
  if (s_count < 0 || t_count < 0 || u_count < 0 || v_count < 0) {
    throw Error(ErrorKind::out_of_range, "response table counts must be nonnegative");
  }
  const std::int64_t total = s_count + t_count + u_count + v_count;
  if (total == 0) {
    throw Error(ErrorKind::empty_table, "response table counts sum to zero");
  }
  const double n = static_cast<double>(total);
  return ResponseTable(static_cast<double>(s_count) / n, static_cast<double>(t_count) / n,
                       static_cast<double>(u_count) / n, static_cast<double>(v_count) / n);
}

// A cohort of n individuals, optionally carrying distinct identifiers.
struct CohortIndex {
  std::int64_t n = 0;
  std::optional<std::vector<std::string>> labels;

  void validate() const {
    if (n < 1) throw Error(ErrorKind::out_of_range, "cohort size n must be >= 1");
    if (labels) {
      if (static_cast<std::int64_t>(labels->size()) != n) {
        throw Error(ErrorKind::out_of_range, "cohort labels length differs from n");
      }
      std::unordered_set<std::string_view> seen;
      for (const auto& label : *labels) {
        if (!seen.insert(label).second) {
          throw Error(ErrorKind::out_of_range, "cohort labels contain duplicate '" + label + "'");
        }
      }
    }
  }
};

}  // namespace trialkit
