#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>

#include "trialkit/core.hpp"
#include "trialkit/errors.hpp"

namespace trialkit::transport {

// Inputs for the randomized-versus-opposites sample-size comparison:
// n randomized-trial sample size, p randomization probability for arm k,
// q fraction preferring arm k, n_star the opposites-design sample size.
struct TransportScenario {
  std::int64_t n = 0;
  Proportion p;
  Proportion q;
  std::optional<std::int64_t> n_star;

  void validate() const {
    if (n < 1) throw Error(ErrorKind::out_of_range, "n must be >= 1");
    if (n_star && *n_star < 1) throw Error(ErrorKind::out_of_range, "n_star must be >= 1");
  }
};

// Expected preference-by-assignment cell sizes. Absent diagonal cells mark
// quantities sourced from the observational study rather than the trial.
struct CellSizes {
  std::optional<double> n_jj;
  double n_jk = 0.0;
  double n_kj = 0.0;
  std::optional<double> n_kk;
};

inline CellSizes randomized_cells(const TransportScenario& scenario) {
  scenario.validate();
  const double n = static_cast<double>(scenario.n);
  const double p = scenario.p.value();
  const double q = scenario.q.value();
  CellSizes cells;
  cells.n_jj = (1.0 - p) * (1.0 - q) * n;
  cells.n_jk = (1.0 - p) * q * n;
  cells.n_kj = p * (1.0 - q) * n;
  cells.n_kk = p * q * n;
  return cells;
}

inline CellSizes opposites_cells(const TransportScenario& scenario) {
  scenario.validate();
  if (!scenario.n_star) {
    throw Error(ErrorKind::missing_nstar, "opposites design needs n_star");
  }
  const double n_star = static_cast<double>(*scenario.n_star);
  const double q = scenario.q.value();
  CellSizes cells;
  cells.n_jk = q * n_star;
  cells.n_kj = (1.0 - q) * n_star;
  return cells;
}

// Smallest opposites-design size whose off-diagonal cells weakly dominate the
// randomized design's for every preference fraction q: the first integer
// strictly above max{p, 1-p} * n. A 1e-9 nudge absorbs floating-point wobble
// when the product lands on an integer.
inline std::int64_t min_nstar_for_dominance(std::int64_t n, Proportion p) {
  if (n < 1) throw Error(ErrorKind::out_of_range, "n must be >= 1");
  const double threshold = std::max(p.value(), 1.0 - p.value()) * static_cast<double>(n);
  return static_cast<std::int64_t>(std::floor(threshold + 1e-9)) + 1;
}

namespace detail {

inline double implied_q(const CellSizes& cells) {
  if (cells.n_jj && cells.n_kk) {
    const double total = *cells.n_jj + cells.n_jk + cells.n_kj + *cells.n_kk;
    if (total <= 0.0) throw Error(ErrorKind::out_of_range, "cell sizes sum to zero");
    return (cells.n_jk + *cells.n_kk) / total;
  }
  const double off_diagonal = cells.n_jk + cells.n_kj;
  if (off_diagonal <= 0.0) throw Error(ErrorKind::out_of_range, "off-diagonal cells sum to zero");
  return cells.n_jk / off_diagonal;
}

}  // namespace detail

// True when the opposites design offers at least the randomized design's
// sample size in both informative (off-diagonal) cells.
inline bool dominance_check(const CellSizes& randomized, const CellSizes& opposites) {
  const double q_r = detail::implied_q(randomized);
  const double q_o = detail::implied_q(opposites);
  if (std::fabs(q_r - q_o) > 1e-9) {
    std::ostringstream msg;
    msg << "implied q differs between designs: " << q_r << " vs " << q_o;
    throw Error(ErrorKind::mismatched_q, msg.str());
  }
  const double slack = 1e-9;
  return opposites.n_jk >= randomized.n_jk - slack && opposites.n_kj >= randomized.n_kj - slack;
}

}  // namespace trialkit::transport
