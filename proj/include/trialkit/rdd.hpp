#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "trialkit/errors.hpp"
#include "trialkit/normal.hpp"
#include "trialkit/random.hpp"

namespace trialkit::rdd {

struct GaussianDensity {
  double mean = 0.0;
  double sd = 1.0;
};

struct UniformDensity {
  double lo = 0.0;
  double hi = 1.0;
};

using LatentDensity = std::variant<GaussianDensity, UniformDensity>;

struct GaussianNoise {
  double scale = 1.0;
};

struct UniformNoise {
  double half_width = 1.0;
};

using NoiseDensity = std::variant<GaussianNoise, UniformNoise>;

inline double latent_pdf(const LatentDensity& density, double u) {
  if (const auto* g = std::get_if<GaussianDensity>(&density)) {
    return normal_pdf((u - g->mean) / g->sd) / g->sd;
  }
  const auto& box = std::get<UniformDensity>(density);
  return (u >= box.lo && u <= box.hi) ? 1.0 / (box.hi - box.lo) : 0.0;
}

inline double latent_cdf(const LatentDensity& density, double u) {
  if (const auto* g = std::get_if<GaussianDensity>(&density)) {
    return normal_cdf((u - g->mean) / g->sd);
  }
  const auto& box = std::get<UniformDensity>(density);
  if (u <= box.lo) return 0.0;
  if (u >= box.hi) return 1.0;
  return (u - box.lo) / (box.hi - box.lo);
}

inline double latent_sample(const LatentDensity& density, Rng& rng) {
  if (const auto* g = std::get_if<GaussianDensity>(&density)) {
    return g->mean + g->sd * inverse_normal_cdf(rng.uniform01());
  }
  const auto& box = std::get<UniformDensity>(density);
  return rng.uniform(box.lo, box.hi);
}

// Effective sampling range covering all but ~1e-15 of the latent mass.
inline std::pair<double, double> latent_range(const LatentDensity& density) {
  if (const auto* g = std::get_if<GaussianDensity>(&density)) {
    return {g->mean - 8.2 * g->sd, g->mean + 8.2 * g->sd};
  }
  const auto& box = std::get<UniformDensity>(density);
  return {box.lo, box.hi};
}

inline double noise_pdf(const NoiseDensity& density, double e) {
  if (const auto* g = std::get_if<GaussianNoise>(&density)) {
    return normal_pdf(e / g->scale) / g->scale;
  }
  const auto& box = std::get<UniformNoise>(density);
  return std::fabs(e) <= box.half_width ? 0.5 / box.half_width : 0.0;
}

inline double noise_sample(const NoiseDensity& density, Rng& rng) {
  if (const auto* g = std::get_if<GaussianNoise>(&density)) {
    return g->scale * inverse_normal_cdf(rng.uniform01());
  }
  const auto& box = std::get<UniformNoise>(density);
  return rng.uniform(-box.half_width, box.half_width);
}

inline double noise_span(const NoiseDensity& density) {
  if (const auto* g = std::get_if<GaussianNoise>(&density)) return 8.2 * g->scale;
  return std::get<UniformNoise>(density).half_width;
}

// A noisy-running-variable scenario: latent score U ~ h, measurement noise
// eps ~ g, Z = U + eps, treatment assigned where Z >= cutoff. Outcomes are
// Bernoulli with probability baseline_fn(u), plus effect_fn(u) when treated.
struct RddScenario {
  double cutoff = 0.0;
  double delta = 0.0;  // half-width of the Z analysis window
  LatentDensity latent;
  NoiseDensity noise;
  std::function<double(double)> baseline_fn;
  std::function<double(double)> effect_fn;
  // Latent window over which the true average effect is reported; defaults
  // to (cutoff - delta, cutoff + delta).
  std::optional<std::pair<double, double>> latent_window;

  std::pair<double, double> effective_latent_window() const {
    if (latent_window) return *latent_window;
    return {cutoff - delta, cutoff + delta};
  }
};

inline constexpr int kDensityGridPoints = 2001;

namespace detail {

inline double simpson(const std::function<double(double)>& f, double lo, double hi, int points) {
  if (points % 2 == 0) ++points;
  const double h = (hi - lo) / static_cast<double>(points - 1);
  double total = f(lo) + f(hi);
  for (int i = 1; i < points - 1; ++i) {
    total += f(lo + h * i) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return total * h / 3.0;
}

inline void check_probability_fn(const RddScenario& scenario) {
  if (!scenario.baseline_fn || !scenario.effect_fn) {
    throw Error(ErrorKind::out_of_range, "scenario needs baseline_fn and effect_fn");
  }
  auto [lo, hi] = latent_range(scenario.latent);
  const auto window = scenario.effective_latent_window();
  lo = std::min(lo, window.first);
  hi = std::max(hi, window.second);
  const double h = (hi - lo) / (kDensityGridPoints - 1);
  for (int i = 0; i < kDensityGridPoints; ++i) {
    const double u = lo + h * i;
    const double base = scenario.baseline_fn(u);
    const double treated = base + scenario.effect_fn(u);
    if (!(base >= -1e-9 && base <= 1.0 + 1e-9)) {
      std::ostringstream msg;
      msg << "baseline_fn(" << u << ") = " << base << " leaves [0, 1]";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
    if (!(treated >= -1e-9 && treated <= 1.0 + 1e-9)) {
      std::ostringstream msg;
      msg << "baseline_fn + effect_fn at u = " << u << " gives " << treated
          << ", outside [0, 1]";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
  }
}

}  // namespace detail

inline void validate_scenario(const RddScenario& scenario) {
  if (!(scenario.delta > 0.0)) throw Error(ErrorKind::out_of_range, "delta must be > 0");
  if (const auto* g = std::get_if<GaussianDensity>(&scenario.latent)) {
    if (!(g->sd > 0.0)) throw Error(ErrorKind::out_of_range, "latent sd must be > 0");
  } else {
    const auto& box = std::get<UniformDensity>(scenario.latent);
    if (!(box.lo < box.hi)) throw Error(ErrorKind::out_of_range, "latent uniform needs lo < hi");
  }
  if (const auto* g = std::get_if<GaussianNoise>(&scenario.noise)) {
    if (!(g->scale > 0.0)) throw Error(ErrorKind::out_of_range, "noise scale must be > 0");
  } else {
    const auto& box = std::get<UniformNoise>(scenario.noise);
    if (!(box.half_width > 0.0)) {
      throw Error(ErrorKind::out_of_range, "noise half_width must be > 0");
    }
  }
  if (scenario.latent_window && !(scenario.latent_window->first < scenario.latent_window->second)) {
    throw Error(ErrorKind::out_of_range, "latent window must be a nonempty interval");
  }

  const auto [lo, hi] = latent_range(scenario.latent);
  const double latent_mass = detail::simpson(
      [&](double u) { return latent_pdf(scenario.latent, u); }, lo, hi, kDensityGridPoints);
  if (std::fabs(latent_mass - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "latent density integrates to " << latent_mass << " on its grid";
    throw Error(ErrorKind::out_of_range, msg.str());
  }
  const double span = noise_span(scenario.noise);
  const double noise_mass = detail::simpson(
      [&](double e) { return noise_pdf(scenario.noise, e); }, -span, span, kDensityGridPoints);
  if (std::fabs(noise_mass - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "noise density integrates to " << noise_mass << " on its grid";
    throw Error(ErrorKind::out_of_range, msg.str());
  }
  detail::check_probability_fn(scenario);
}

struct RddResult {
  double window_estimate = 0.0;   // treated-minus-control rate inside the Z window
  double true_window_ate = 0.0;   // mean effect_fn over the latent window subpopulation
  double rate_above = 0.0;        // outcome rate for Z in [cutoff, cutoff + delta)
  double rate_below = 0.0;        // outcome rate for Z in (cutoff - delta, cutoff)
  double mc_se = 0.0;
  std::uint64_t n_window = 0;
  std::uint64_t n_above = 0;
  std::uint64_t n_below = 0;
  std::uint64_t n_latent_window = 0;
  std::optional<std::string> warning;
};

inline RddResult simulate_rdd(const RddScenario& scenario, std::uint64_t n_pop,
                              SeededStream stream) {
  validate_scenario(scenario);
  if (n_pop < 1) throw Error(ErrorKind::out_of_range, "n_pop must be >= 1");

  Rng rng(stream);
  const auto window = scenario.effective_latent_window();
  std::uint64_t n_above = 0, n_below = 0, succ_above = 0, succ_below = 0;
  std::uint64_t n_latent = 0;
  double effect_sum = 0.0;

  for (std::uint64_t i = 0; i < n_pop; ++i) {
    const double u = latent_sample(scenario.latent, rng);
    const double z = u + noise_sample(scenario.noise, rng);
    if (u > window.first && u < window.second) {
      effect_sum += scenario.effect_fn(u);
      ++n_latent;
    }
    if (std::fabs(z - scenario.cutoff) >= scenario.delta) continue;
    const bool treated = z >= scenario.cutoff;
    double p = scenario.baseline_fn(u) + (treated ? scenario.effect_fn(u) : 0.0);
    if (!(p >= -1e-12 && p <= 1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "outcome probability " << p << " at u = " << u << " leaves [0, 1]";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
    p = std::clamp(p, 0.0, 1.0);
    const bool y = rng.bernoulli(p);
    if (treated) {
      ++n_above;
      succ_above += y ? 1 : 0;
    } else {
      ++n_below;
      succ_below += y ? 1 : 0;
    }
  }

  if (n_above == 0 || n_below == 0) {
    std::ostringstream msg;
    msg << "Z window around " << scenario.cutoff << " +/- " << scenario.delta
        << " captured " << n_above << " treated and " << n_below << " control individuals";
    throw Error(ErrorKind::degenerate_window, msg.str());
  }

  RddResult result;
  result.n_above = n_above;
  result.n_below = n_below;
  result.n_window = n_above + n_below;
  result.rate_above = static_cast<double>(succ_above) / static_cast<double>(n_above);
  result.rate_below = static_cast<double>(succ_below) / static_cast<double>(n_below);
  result.window_estimate = result.rate_above - result.rate_below;
  result.mc_se = std::sqrt(result.rate_above * (1.0 - result.rate_above) / static_cast<double>(n_above) +
                           result.rate_below * (1.0 - result.rate_below) / static_cast<double>(n_below));
  result.n_latent_window = n_latent;
  if (n_latent > 0) {
    result.true_window_ate = effect_sum / static_cast<double>(n_latent);
  } else {
    result.true_window_ate = 0.0;
    result.warning = "latent window captured no individuals; true_window_ate unavailable";
  }
  if (n_pop < 1000) {
    result.warning = "n_pop below 1000; mc_se is a coarse estimate";
  }
  return result;
}

struct DensityPoint {
  double u = 0.0;
  double density = 0.0;
};

// Latent-score density conditional on a measured value z: the normalized
// product h(u) g(u - z), trapezoid-normalized on the supplied grid.
inline std::vector<DensityPoint> conditional_latent_density(const RddScenario& scenario, double z,
                                                            const std::vector<double>& grid) {
  if (grid.size() < 3) throw Error(ErrorKind::out_of_range, "density grid needs >= 3 points");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw Error(ErrorKind::out_of_range, "density grid must be strictly increasing");
    }
  }
  std::vector<DensityPoint> points(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    points[i].u = grid[i];
    points[i].density = latent_pdf(scenario.latent, grid[i]) * noise_pdf(scenario.noise, grid[i] - z);
  }
  double mass = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    mass += 0.5 * (points[i].density + points[i - 1].density) * (grid[i] - grid[i - 1]);
  }
  if (!(mass > 1e-300)) {
    std::ostringstream msg;
    msg << "h(u) g(u - z) is numerically zero on the grid for z = " << z;
    throw Error(ErrorKind::zero_mass, msg.str());
  }
  for (auto& point : points) point.density /= mass;
  return points;
}

inline std::vector<double> default_density_grid(const RddScenario& scenario, double z,
                                                int points = kDensityGridPoints) {
  const double span = noise_span(scenario.noise);
  double lo = z - span;
  double hi = z + span;
  if (const auto* box = std::get_if<UniformDensity>(&scenario.latent)) {
    lo = std::max(lo, box->lo);
    hi = std::min(hi, box->hi);
  }
  if (!(lo < hi)) {
    throw Error(ErrorKind::zero_mass, "latent support and noise span do not overlap");
  }
  std::vector<double> grid(points);
  const double h = (hi - lo) / static_cast<double>(points - 1);
  for (int i = 0; i < points; ++i) grid[i] = lo + h * i;
  return grid;
}

// Constructs the cautionary scenario: a treatment that helps inside a central
// band around the cutoff and harms on the flanking bands, calibrated so the
// average effect over the latent window is exactly zero while the
// noise-reweighted effect stays positive. Gaussian noise only.
inline RddScenario adversarial_scenario(double cutoff, std::pair<double, double> latent_window,
                                        double noise_scale) {
  if (!(latent_window.first < cutoff && cutoff < latent_window.second)) {
    throw Error(ErrorKind::out_of_range, "latent window must contain the cutoff");
  }
  if (!(noise_scale > 0.0)) {
    throw Error(ErrorKind::out_of_range, "noise_scale must be > 0");
  }

  const double lo = latent_window.first;
  const double hi = latent_window.second;
  const double half_width = std::min(cutoff - lo, hi - cutoff);
  const double band = noise_scale;  // central band half-width
  const double baseline = 0.10;
  const double effect_plus = 0.08;

  RddScenario scenario;
  scenario.cutoff = cutoff;
  scenario.delta = 0.1 * half_width;
  scenario.latent = GaussianDensity{cutoff, 2.5 * std::max(cutoff - lo, hi - cutoff)};
  scenario.noise = GaussianNoise{noise_scale};
  scenario.latent_window = latent_window;
  scenario.baseline_fn = [baseline](double) { return baseline; };

  // Latent-window integral of effect * h, in closed form via the latent CDF.
  const LatentDensity latent = scenario.latent;
  const double central_lo = std::max(lo, cutoff - band);
  const double central_hi = std::min(hi, cutoff + band);
  auto window_integral = [&](double e_minus) {
    const double central_mass = latent_cdf(latent, central_hi) - latent_cdf(latent, central_lo);
    const double flank_mass = (latent_cdf(latent, central_lo) - latent_cdf(latent, lo)) +
                              (latent_cdf(latent, hi) - latent_cdf(latent, central_hi));
    return effect_plus * central_mass - e_minus * flank_mass;
  };

  double lo_e = 0.0;
  double hi_e = baseline - 1e-6;  // keep treated probabilities nonnegative
  if (!(window_integral(lo_e) > 0.0) || !(window_integral(hi_e) < 0.0)) {
    throw Error(ErrorKind::calibration_failed,
                "no harm magnitude balances the latent-window effect for this geometry");
  }
  double e_minus = 0.0;
  bool converged = false;
  for (int iteration = 0; iteration < 200; ++iteration) {
    e_minus = 0.5 * (lo_e + hi_e);
    const double value = window_integral(e_minus);
    if (std::fabs(value) <= 1e-6) {
      converged = true;
      break;
    }
    (value > 0.0 ? lo_e : hi_e) = e_minus;
  }
  if (!converged) {
    throw Error(ErrorKind::calibration_failed,
                "root-find on the latent-window effect integral did not converge");
  }

  scenario.effect_fn = [cutoff, lo, hi, band, effect_plus, e_minus](double u) {
    if (std::fabs(u - cutoff) < band) return effect_plus;
    if (u > lo && u < hi) return -e_minus;
    return 0.0;
  };

  // The construction only matters if noise reweighting leaves a positive
  // conditional effect near the cutoff; integrate piecewise (the effect has
  // jumps at the band edges).
  auto reweighted = [&](double a, double b) {
    return detail::simpson(
        [&](double u) {
          return scenario.effect_fn(u) * latent_pdf(latent, u) *
                 noise_pdf(scenario.noise, u - cutoff);
        },
        a, b, 501);
  };
  const double gain = reweighted(lo, central_lo) + reweighted(central_lo, central_hi) +
                      reweighted(central_hi, hi);
  if (!(gain > 0.0)) {
    throw Error(ErrorKind::calibration_failed,
                "noise reweighting does not favor the helped band; scenario is degenerate");
  }
  validate_scenario(scenario);
  return scenario;
}

}  // namespace trialkit::rdd
