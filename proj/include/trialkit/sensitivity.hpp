#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <vector>

#include "trialkit/core.hpp"
#include "trialkit/errors.hpp"

namespace trialkit::sensitivity {

// Closed-form pieces shared by the double API and the exact-rational test
// path. T needs +, -, /, ordering and construction from small integers.

template <class T>
T upper_bound_value(T r_j, T r_k) {
  T sum = r_j + r_k;
  T one{1};
  return sum < one ? sum : one;
}

template <class T>
T lower_bound_value(T r_j, T r_k) {
  T one{1};
  return one - upper_bound_value(one - r_j, one - r_k);
}

template <class T>
T upper_bound_value(T r_j, T r_k, T alpha) {
  T scaled = (r_j + r_k + alpha) / T{2};
  T one{1};
  return scaled < one ? scaled : one;
}

template <class T>
T lower_bound_value(T r_j, T r_k, T alpha) {
  T one{1};
  return one - upper_bound_value(one - r_j, one - r_k, alpha);
}

// Best and worst success rates achievable by an intervention policy that is
// consistent with the observed arm rates (and the affected proportion, when
// one was supplied).
struct BoundsResult {
  Proportion upper;
  Proportion lower;
  std::optional<Proportion> alpha_used;
};

// Interval of affected proportions compatible with a rate pair.
struct AlphaDomain {
  Proportion lo;
  Proportion hi;
};

inline AlphaDomain alpha_domain(const RatePair& rates) {
  const double rj = rates.r_j.value();
  const double rk = rates.r_k.value();
  return AlphaDomain{clamped_proportion(std::fabs(rj - rk), "alpha domain lo"),
                     clamped_proportion(std::min(rj + rk, 1.0), "alpha domain hi")};
}

inline BoundsResult bounds_unconstrained(const RatePair& rates) {
  const double rj = rates.r_j.value();
  const double rk = rates.r_k.value();
  return BoundsResult{clamped_proportion(upper_bound_value(rj, rk), "U"),
                      clamped_proportion(lower_bound_value(rj, rk), "L"),
                      std::nullopt};
}

inline BoundsResult bounds_with_alpha(const RatePair& rates, Proportion alpha) {
  const AlphaDomain domain = alpha_domain(rates);
  const double a = alpha.value();
  if (a < domain.lo.value() - kRateTolerance || a > domain.hi.value() + kRateTolerance) {
    std::ostringstream msg;
    msg << "alpha = " << a << " is outside the feasible domain [" << domain.lo.value()
        << ", " << domain.hi.value() << "] for rates (" << rates.r_j.value() << ", "
        << rates.r_k.value() << ")";
    throw Error(ErrorKind::alpha_infeasible, msg.str());
  }
  const double rj = rates.r_j.value();
  const double rk = rates.r_k.value();
  return BoundsResult{clamped_proportion(upper_bound_value(rj, rk, a), "U"),
                      clamped_proportion(lower_bound_value(rj, rk, a), "L"), alpha};
}

// Enumeration oracle over integer response tables. Every feasible quadruple
// (S, T, U, V) with S+T+U+V = n, S+U = n*r_k, S+V = n*r_j (and U+V = n*alpha
// when alpha is supplied) is visited; the extremes of S+U+V and S give the
// bounds. Note the signature: the randomization probability plays no role.
struct OracleResult {
  BoundsResult bounds;
  std::int64_t feasible_tables = 0;
  std::int64_t n = 0;
  std::int64_t upper_count = 0;  // n * U
  std::int64_t lower_count = 0;  // n * L
};

inline std::int64_t scaled_count(double rate, std::int64_t n, std::string_view field) {
  const double scaled = rate * static_cast<double>(n);
  const std::int64_t rounded = std::llround(scaled);
  if (std::fabs(scaled - static_cast<double>(rounded)) > 1e-9) {
    std::ostringstream msg;
    msg << field << " = " << rate << " is not an integer multiple of 1/" << n;
    throw Error(ErrorKind::non_integral_rates, msg.str());
  }
  return rounded;
}

inline OracleResult oracle_bounds(std::int64_t n, const RatePair& rates,
                                  std::optional<Proportion> alpha = std::nullopt,
                                  std::int64_t cap = 10'000) {
  if (n < 1) throw Error(ErrorKind::out_of_range, "oracle n must be >= 1");
  if (n > cap) {
    std::ostringstream msg;
    msg << "oracle n = " << n << " exceeds the enumeration cap " << cap;
    throw Error(ErrorKind::cap_exceeded, msg.str());
  }
  const std::int64_t a = scaled_count(rates.r_j.value(), n, "r_j");
  const std::int64_t b = scaled_count(rates.r_k.value(), n, "r_k");
  std::optional<std::int64_t> c;
  if (alpha) c = scaled_count(alpha->value(), n, "alpha");

  std::int64_t feasible = 0;
  std::int64_t best_upper = -1;
  std::int64_t best_lower = -1;
  for (std::int64_t s = 0; s <= std::min(a, b); ++s) {
    const std::int64_t u = b - s;
    const std::int64_t v = a - s;
    const std::int64_t t = n - s - u - v;
    if (u < 0 || v < 0 || t < 0) continue;
    if (c && u + v != *c) continue;
    ++feasible;
    best_upper = std::max(best_upper, s + u + v);
    best_lower = best_lower < 0 ? s : std::min(best_lower, s);
  }
  if (feasible == 0) {
    std::ostringstream msg;
    msg << "no integer response table matches n = " << n << ", r_j = " << rates.r_j.value()
        << ", r_k = " << rates.r_k.value();
    if (c) msg << ", alpha = " << alpha->value();
    throw Error(ErrorKind::infeasible_constraints, msg.str());
  }
  OracleResult result;
  result.feasible_tables = feasible;
  result.n = n;
  result.upper_count = best_upper;
  result.lower_count = best_lower;
  const double dn = static_cast<double>(n);
  result.bounds = BoundsResult{Proportion(static_cast<double>(best_upper) / dn, "U"),
                               Proportion(static_cast<double>(best_lower) / dn, "L"), alpha};
  return result;
}

// Worst-case success rate once an excluded fraction and a withdrawn fraction
// are charged against it in full.
inline Proportion attrition_adjusted_rate(Proportion sr, Proportion excluded,
                                          Proportion withdrawn) {
  const double attrition = excluded.value() + withdrawn.value();
  if (attrition > 1.0 + kRateTolerance) {
    std::ostringstream msg;
    msg << "excluded + withdrawn = " << attrition << " exceeds 1";
    throw Error(ErrorKind::bad_attrition, msg.str());
  }
  return Proportion(std::max(sr.value() - attrition, 0.0), "adjusted rate");
}

// Fully specified potential outcomes for a two-arm cohort; a what-if input,
// not something estimable from one realized assignment.
struct PotentialOutcomeCohort {
  std::vector<std::uint8_t> y_j;  // outcome under treatment x_j, entries 0/1
  std::vector<std::uint8_t> y_k;  // outcome under treatment x_k, entries 0/1
  std::optional<std::vector<std::uint8_t>> assigned;  // 0 = arm j, 1 = arm k

  std::size_t size() const { return y_j.size(); }

  void validate() const {
    if (y_j.empty() || y_j.size() != y_k.size()) {
      throw Error(ErrorKind::out_of_range, "potential outcome vectors must be nonempty and equal length");
    }
    auto binary = [](const std::vector<std::uint8_t>& ys, const char* name) {
      for (auto y : ys) {
        if (y > 1) throw Error(ErrorKind::out_of_range, std::string(name) + " entries must be 0 or 1");
      }
    };
    binary(y_j, "Y_j");
    binary(y_k, "Y_k");
    if (assigned) {
      if (assigned->size() != y_j.size()) {
        throw Error(ErrorKind::missing_assignment, "assignment vector length differs from cohort size");
      }
      binary(*assigned, "assignment");
    }
  }
};

inline ResponseTable derive_response_table(const PotentialOutcomeCohort& cohort) {
  cohort.validate();
  std::int64_t s = 0, t = 0, u = 0, v = 0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const bool j = cohort.y_j[i] != 0;
    const bool k = cohort.y_k[i] != 0;
    if (j && k) ++s;
    else if (!j && !k) ++t;
    else if (k) ++u;
    else ++v;
  }
  return response_table_from_counts(s, t, u, v);
}

// Multi-arm generalization used by the confounding checker: one 0/1 potential
// outcome per (individual, arm) pair, plus the realized arm per individual.
// Arm labels are strictly increasing integers so that a shift x -> x+k is
// well defined. Entry -1 marks a missing potential outcome.
struct MultiArmCohort {
  std::vector<long> arm_labels;
  std::vector<std::vector<int>> outcomes;  // n rows, arm_labels.size() columns
  std::vector<int> assigned;               // n arm indices

  std::size_t size() const { return outcomes.size(); }
  std::size_t arms() const { return arm_labels.size(); }
};

struct ExpectationComparison {
  long condition_arm = 0;  // label of the conditioning arm x
  long shift = 0;          // nonzero label shift k
  double lhs = 0.0;        // E(Y_{x+k} | x)
  double rhs = 0.0;        // E(Y | x+k)
  bool within_tolerance = false;
};

struct MarginalComparison {
  long arm = 0;
  double potential_mean = 0.0;  // E(Y_x) over the whole cohort
  double observed_mean = 0.0;   // E(Y | x) over the assigned individuals
  bool within_tolerance = false;
};

struct ConfoundingVerdict {
  bool marginal_holds = false;
  bool conditional_holds = false;
  std::vector<ExpectationComparison> discrepancies;  // every tested (x, k) pair
  std::vector<MarginalComparison> marginal_checks;
};

namespace detail {

inline void validate_multiarm(const MultiArmCohort& cohort) {
  if (cohort.arm_labels.size() < 2) {
    throw Error(ErrorKind::out_of_range, "confounding check needs at least two arms");
  }
  for (std::size_t i = 1; i < cohort.arm_labels.size(); ++i) {
    if (cohort.arm_labels[i] <= cohort.arm_labels[i - 1]) {
      throw Error(ErrorKind::out_of_range, "arm labels must be strictly increasing");
    }
  }
  if (cohort.outcomes.empty()) {
    throw Error(ErrorKind::missing_potential_outcome, "no potential outcomes supplied");
  }
  if (cohort.assigned.size() != cohort.outcomes.size()) {
    throw Error(ErrorKind::missing_assignment, "assignment vector length differs from cohort size");
  }
  for (std::size_t i = 0; i < cohort.outcomes.size(); ++i) {
    if (cohort.outcomes[i].size() != cohort.arms()) {
      std::ostringstream msg;
      msg << "individual " << i << " has " << cohort.outcomes[i].size()
          << " potential outcomes, expected " << cohort.arms();
      throw Error(ErrorKind::missing_potential_outcome, msg.str());
    }
    const int arm = cohort.assigned[i];
    if (arm < 0 || static_cast<std::size_t>(arm) >= cohort.arms()) {
      std::ostringstream msg;
      msg << "individual " << i << " is assigned to unknown arm index " << arm;
      throw Error(ErrorKind::missing_assignment, msg.str());
    }
  }
}

// Mean of column `arm` over the given rows; every needed entry must exist.
inline double column_mean(const MultiArmCohort& cohort, std::size_t arm,
                          const std::vector<std::size_t>& rows) {
  double total = 0.0;
  for (std::size_t i : rows) {
    const int y = cohort.outcomes[i][arm];
    if (y != 0 && y != 1) {
      std::ostringstream msg;
      msg << "potential outcome for individual " << i << " under arm label "
          << cohort.arm_labels[arm] << " is missing";
      throw Error(ErrorKind::missing_potential_outcome, msg.str());
    }
    total += y;
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace detail

inline ConfoundingVerdict check_conditional_no_confounding(const MultiArmCohort& cohort,
                                                           double tolerance = 1e-9) {
  detail::validate_multiarm(cohort);
  const std::size_t arms = cohort.arms();

  std::vector<std::vector<std::size_t>> by_arm(arms);
  std::vector<std::size_t> everyone(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    everyone[i] = i;
    by_arm[cohort.assigned[i]].push_back(i);
  }

  ConfoundingVerdict verdict;
  verdict.marginal_holds = true;
  verdict.conditional_holds = true;

  for (std::size_t x = 0; x < arms; ++x) {
    if (by_arm[x].empty()) continue;
    MarginalComparison check;
    check.arm = cohort.arm_labels[x];
    check.potential_mean = detail::column_mean(cohort, x, everyone);
    check.observed_mean = detail::column_mean(cohort, x, by_arm[x]);
    check.within_tolerance = std::fabs(check.potential_mean - check.observed_mean) <= tolerance;
    verdict.marginal_holds = verdict.marginal_holds && check.within_tolerance;
    verdict.marginal_checks.push_back(check);
  }

  for (std::size_t x = 0; x < arms; ++x) {
    if (by_arm[x].empty()) continue;
    for (std::size_t target = 0; target < arms; ++target) {
      if (target == x || by_arm[target].empty()) continue;
      ExpectationComparison cmp;
      cmp.condition_arm = cohort.arm_labels[x];
      cmp.shift = cohort.arm_labels[target] - cohort.arm_labels[x];
      cmp.lhs = detail::column_mean(cohort, target, by_arm[x]);
      cmp.rhs = detail::column_mean(cohort, target, by_arm[target]);
      cmp.within_tolerance = std::fabs(cmp.lhs - cmp.rhs) <= tolerance;
      verdict.conditional_holds = verdict.conditional_holds && cmp.within_tolerance;
      verdict.discrepancies.push_back(cmp);
    }
  }
  return verdict;
}

inline ConfoundingVerdict check_conditional_no_confounding(const PotentialOutcomeCohort& cohort,
                                                           double tolerance = 1e-9) {
  cohort.validate();
  if (!cohort.assigned) {
    throw Error(ErrorKind::missing_assignment, "confounding check requires an assignment vector");
  }
  MultiArmCohort multi;
  multi.arm_labels = {0, 1};  // 0 = arm j, 1 = arm k
  multi.outcomes.reserve(cohort.size());
  multi.assigned.reserve(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    multi.outcomes.push_back({cohort.y_j[i], cohort.y_k[i]});
    multi.assigned.push_back((*cohort.assigned)[i]);
  }
  return check_conditional_no_confounding(multi, tolerance);
}

}  // namespace trialkit::sensitivity
