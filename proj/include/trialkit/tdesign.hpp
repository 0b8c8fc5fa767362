#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "trialkit/core.hpp"
#include "trialkit/errors.hpp"
#include "trialkit/normal.hpp"
#include "trialkit/random.hpp"

namespace trialkit::tdesign {

struct TimeWindow {
  double start = 0.0;
  double end = 1.0;

  void validate() const {
    if (!(start < end)) {
      throw Error(ErrorKind::out_of_range, "time window start must precede end");
    }
  }
  double length() const { return end - start; }
};

// Presentation-time families. Truncated-normal parameters refer to the
// pre-truncation distribution; the realized support is the whole window.
struct TruncatedNormalMember {
  double mean = 0.0;
  double sd = 1.0;
};

struct UniformMember {
  double lo = 0.0;
  double hi = 1.0;
};

// Piecewise-linear quantile function: probs rise from 0 to 1, values rise
// across the window. Malformed tables are reported lazily, when a variance
// or a sample is actually requested.
struct QuantileTableMember {
  std::vector<double> probs;
  std::vector<double> values;
};

using MemberDistribution = std::variant<TruncatedNormalMember, UniformMember, QuantileTableMember>;

namespace detail {

inline void validate_quantile_table(const QuantileTableMember& member) {
  const auto& p = member.probs;
  const auto& v = member.values;
  if (p.size() < 2 || p.size() != v.size()) {
    throw Error(ErrorKind::variance_unavailable,
                "quantile table needs matching probs/values with at least two points");
  }
  if (std::fabs(p.front()) > 1e-12 || std::fabs(p.back() - 1.0) > 1e-12) {
    throw Error(ErrorKind::variance_unavailable, "quantile table probs must span [0, 1]");
  }
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (!(p[i] > p[i - 1])) {
      throw Error(ErrorKind::variance_unavailable, "quantile table probs must be strictly increasing");
    }
    if (!(v[i] > v[i - 1])) {
      throw Error(ErrorKind::variance_unavailable,
                  "quantile table values must be strictly increasing for continuous support");
    }
  }
}

struct TruncatedNormalParams {
  double mean, sd, p_lo, p_hi;
};

inline TruncatedNormalParams truncated_normal_params(const TruncatedNormalMember& member,
                                                     const TimeWindow& window) {
  if (!(member.sd > 0.0)) {
    throw Error(ErrorKind::out_of_range, "truncated-normal member needs sd > 0");
  }
  const double lo = (window.start - member.mean) / member.sd;
  const double hi = (window.end - member.mean) / member.sd;
  TruncatedNormalParams params{member.mean, member.sd, normal_cdf(lo), normal_cdf(hi)};
  if (!(params.p_hi - params.p_lo > 1e-14)) {
    throw Error(ErrorKind::out_of_range,
                "truncated-normal member has no probability mass inside the window");
  }
  return params;
}

}  // namespace detail

// Post-truncation variance of a member distribution.
inline double member_variance(const MemberDistribution& member, const TimeWindow& window) {
  window.validate();
  if (const auto* tn = std::get_if<TruncatedNormalMember>(&member)) {
    const auto params = detail::truncated_normal_params(*tn, window);
    const double a = (window.start - tn->mean) / tn->sd;
    const double b = (window.end - tn->mean) / tn->sd;
    const double z = params.p_hi - params.p_lo;
    const double pa = normal_pdf(a);
    const double pb = normal_pdf(b);
    const double correction = (a * pa - b * pb) / z;
    const double shift = (pa - pb) / z;
    return tn->sd * tn->sd * (1.0 + correction - shift * shift);
  }
  if (const auto* uniform = std::get_if<UniformMember>(&member)) {
    if (!(uniform->lo < uniform->hi)) {
      throw Error(ErrorKind::out_of_range, "uniform member needs lo < hi");
    }
    const double width = uniform->hi - uniform->lo;
    return width * width / 12.0;
  }
  const auto& table = std::get<QuantileTableMember>(member);
  detail::validate_quantile_table(table);
  // The quantile function is piecewise linear, so the first two moments
  // integrate in closed form segment by segment (tolerance well under 1e-8).
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t i = 1; i < table.probs.size(); ++i) {
    const double w = table.probs[i] - table.probs[i - 1];
    const double q0 = table.values[i - 1];
    const double q1 = table.values[i];
    mean += w * 0.5 * (q0 + q1);
    second += w * (q0 * q0 + q0 * q1 + q1 * q1) / 3.0;
  }
  return second - mean * mean;
}

// A clinical sample with per-individual presentation-time distributions and
// the treated fraction p. The treated subsample size m = p*n must be a
// positive integer; fractional products are rejected, not rounded.
class PresentationCohort {
 public:
  PresentationCohort(TimeWindow window, std::vector<MemberDistribution> members,
                     Proportion treated_fraction)
      : window_(window), members_(std::move(members)), treated_fraction_(treated_fraction) {
    window_.validate();
    if (members_.size() < 2) {
      throw Error(ErrorKind::out_of_range, "presentation cohort needs at least two members");
    }
    const double scaled = treated_fraction_.value() * static_cast<double>(members_.size());
    const std::int64_t rounded = std::llround(scaled);
    if (std::fabs(scaled - static_cast<double>(rounded)) > 1e-9 || rounded < 1) {
      std::ostringstream msg;
      msg << "treated fraction " << treated_fraction_.value() << " times cohort size "
          << members_.size() << " must be a positive integer";
      throw Error(ErrorKind::out_of_range, msg.str());
    }
    subsample_size_ = static_cast<int>(rounded);
    for (std::size_t i = 0; i < members_.size(); ++i) {
      validate_support(members_[i], i);
    }
  }

  const TimeWindow& window() const { return window_; }
  const std::vector<MemberDistribution>& members() const { return members_; }
  Proportion treated_fraction() const { return treated_fraction_; }
  int size() const { return static_cast<int>(members_.size()); }
  int subsample_size() const { return subsample_size_; }

 private:
  void validate_support(const MemberDistribution& member, std::size_t index) const {
    const double slack = 1e-12 * std::max(1.0, std::fabs(window_.length()));
    if (const auto* uniform = std::get_if<UniformMember>(&member)) {
      if (!(uniform->lo < uniform->hi) || uniform->lo < window_.start - slack ||
          uniform->hi > window_.end + slack) {
        std::ostringstream msg;
        msg << "member " << index << ": uniform support [" << uniform->lo << ", " << uniform->hi
            << "] must lie inside the window";
        throw Error(ErrorKind::out_of_range, msg.str());
      }
    } else if (const auto* table = std::get_if<QuantileTableMember>(&member)) {
      if (table->values.empty()) {
        throw Error(ErrorKind::variance_unavailable, "quantile table has no values");
      }
      const auto [lo, hi] = std::minmax_element(table->values.begin(), table->values.end());
      if (*lo < window_.start - slack || *hi > window_.end + slack) {
        std::ostringstream msg;
        msg << "member " << index << ": quantile table values leave the window";
        throw Error(ErrorKind::out_of_range, msg.str());
      }
    } else {
      detail::truncated_normal_params(std::get<TruncatedNormalMember>(member), window_);
    }
  }

  TimeWindow window_;
  std::vector<MemberDistribution> members_;
  Proportion treated_fraction_;
  int subsample_size_ = 0;
};

// Design parameter K = sigma2_min / (t_e - t_s).
struct DesignK {
  double sigma2_min = 0.0;
  double length = 0.0;
  double k = 0.0;
};

inline DesignK compute_K(const PresentationCohort& cohort) {
  double sigma2_min = std::numeric_limits<double>::infinity();
  for (const auto& member : cohort.members()) {
    sigma2_min = std::min(sigma2_min, member_variance(member, cohort.window()));
  }
  DesignK design;
  design.sigma2_min = sigma2_min;
  design.length = cohort.window().length();
  design.k = sigma2_min / design.length;
  return design;
}

// Precomputed per-member samplers; one uniform draw per member per subsample.
class TdSampler {
 public:
  explicit TdSampler(const PresentationCohort& cohort)
      : m_(cohort.subsample_size()) {
    const auto& window = cohort.window();
    for (const auto& member : cohort.members()) {
      if (const auto* tn = std::get_if<TruncatedNormalMember>(&member)) {
        const auto params = detail::truncated_normal_params(*tn, window);
        prepared_.push_back(Prepared{Prepared::Family::truncated_normal, params.mean, params.sd,
                                     params.p_lo, params.p_hi - params.p_lo, window.start,
                                     window.end, nullptr});
      } else if (const auto* uniform = std::get_if<UniformMember>(&member)) {
        prepared_.push_back(Prepared{Prepared::Family::uniform, uniform->lo,
                                     uniform->hi - uniform->lo, 0.0, 0.0, window.start, window.end,
                                     nullptr});
      } else {
        const auto* table = std::get_if<QuantileTableMember>(&member);
        detail::validate_quantile_table(*table);
        prepared_.push_back(Prepared{Prepared::Family::quantile_table, 0.0, 0.0, 0.0, 0.0,
                                     window.start, window.end, table});
      }
    }
    times_.resize(prepared_.size());
    order_.resize(prepared_.size());
  }

  int subsample_size() const { return m_; }
  int cohort_size() const { return static_cast<int>(prepared_.size()); }

  // Draws one presentation time per member and fills `subset` with the
  // ascending indices of the m latest presenters. Ties prefer the lower
  // index, a measure-zero event for continuous members.
  void draw_into(Rng& rng, std::vector<int>& subset) {
    const int n = cohort_size();
    for (int i = 0; i < n; ++i) {
      times_[i] = prepared_[i].draw(rng);
      order_[i] = i;
    }
    std::nth_element(order_.begin(), order_.begin() + m_, order_.end(), [&](int a, int b) {
      if (times_[a] != times_[b]) return times_[a] > times_[b];
      return a < b;
    });
    subset.assign(order_.begin(), order_.begin() + m_);
    std::sort(subset.begin(), subset.end());
  }

 private:
  struct Prepared {
    enum class Family { truncated_normal, uniform, quantile_table };
    Family family;
    double a, b, c, d;  // family-specific precomputed parameters
    double window_start, window_end;
    const QuantileTableMember* table;

    double draw(Rng& rng) const {
      const double u = rng.uniform01();
      switch (family) {
        case Family::truncated_normal: {
          const double x = a + b * inverse_normal_cdf(c + u * d);
          return std::clamp(x, window_start, window_end);
        }
        case Family::uniform:
          return a + u * b;
        case Family::quantile_table: {
          const auto& probs = table->probs;
          const auto& values = table->values;
          const auto it = std::upper_bound(probs.begin(), probs.end(), u);
          const std::size_t hi = std::min<std::size_t>(
              std::max<std::size_t>(1, static_cast<std::size_t>(it - probs.begin())),
              probs.size() - 1);
          const double t = (u - probs[hi - 1]) / (probs[hi] - probs[hi - 1]);
          return values[hi - 1] + t * (values[hi] - values[hi - 1]);
        }
      }
      return a;
    }
  };

  int m_;
  std::vector<Prepared> prepared_;
  std::vector<double> times_;
  std::vector<int> order_;
};

inline std::vector<int> sample_td_subsample(const PresentationCohort& cohort, Rng& rng) {
  TdSampler sampler(cohort);
  std::vector<int> subset;
  sampler.draw_into(rng, subset);
  return subset;
}

// Distribution over size-m index subsets, exact (uniform benchmark) or
// empirical (Monte Carlo frequencies, with the raw counts retained).
struct SubsampleDistribution {
  enum class Kind { exact, empirical };

  int n = 0;
  int m = 0;
  Kind kind = Kind::exact;
  std::uint64_t draws = 0;                           // empirical only
  std::map<std::vector<int>, std::uint64_t> counts;  // empirical only
  std::map<std::vector<int>, double> masses;
};

// C(n, m), saturating at cap + 1.
inline std::int64_t subset_space_size(std::int64_t n, std::int64_t m, std::int64_t cap) {
  if (m < 0 || m > n) return 0;
  m = std::min(m, n - m);
  std::int64_t result = 1;
  for (std::int64_t i = 1; i <= m; ++i) {
    result = result * (n - m + i) / i;
    if (result > cap) return cap + 1;
  }
  return result;
}

inline constexpr std::int64_t kDefaultEnumerationCap = 10'000;

inline SubsampleDistribution td_distribution(const PresentationCohort& cohort,
                                             std::uint64_t draws, SeededStream stream,
                                             std::int64_t cap = kDefaultEnumerationCap) {
  const std::int64_t space = subset_space_size(cohort.size(), cohort.subsample_size(), cap);
  if (space > cap) {
    std::ostringstream msg;
    msg << "subset space C(" << cohort.size() << ", " << cohort.subsample_size()
        << ") exceeds the enumeration cap " << cap;
    throw Error(ErrorKind::space_too_large, msg.str());
  }
  if (draws == 0) throw Error(ErrorKind::out_of_range, "draws must be >= 1");

  SubsampleDistribution dist;
  dist.n = cohort.size();
  dist.m = cohort.subsample_size();
  dist.kind = SubsampleDistribution::Kind::empirical;
  dist.draws = draws;

  TdSampler sampler(cohort);
  Rng rng(stream);
  std::vector<int> subset;
  for (std::uint64_t i = 0; i < draws; ++i) {
    sampler.draw_into(rng, subset);
    ++dist.counts[subset];
  }
  for (const auto& [key, count] : dist.counts) {
    dist.masses[key] = static_cast<double>(count) / static_cast<double>(draws);
  }
  return dist;
}

inline SubsampleDistribution randomized_distribution(int n, int m,
                                                     std::int64_t cap = kDefaultEnumerationCap) {
  if (n < 1 || m < 1 || m > n) {
    throw Error(ErrorKind::out_of_range, "randomized distribution needs 1 <= m <= n");
  }
  const std::int64_t space = subset_space_size(n, m, cap);
  if (space > cap) {
    std::ostringstream msg;
    msg << "subset space C(" << n << ", " << m << ") exceeds the enumeration cap " << cap;
    throw Error(ErrorKind::space_too_large, msg.str());
  }
  SubsampleDistribution dist;
  dist.n = n;
  dist.m = m;
  dist.kind = SubsampleDistribution::Kind::exact;
  const double mass = 1.0 / static_cast<double>(space);

  std::vector<int> subset(m);
  for (int i = 0; i < m; ++i) subset[i] = i;
  while (true) {
    dist.masses[subset] = mass;
    int i = m - 1;
    while (i >= 0 && subset[i] == n - m + i) --i;
    if (i < 0) break;
    ++subset[i];
    for (int j = i + 1; j < m; ++j) subset[j] = subset[j - 1] + 1;
  }
  return dist;
}

// Total-variation distance between two distributions on the same subset space.
inline double tv_distance(const SubsampleDistribution& a, const SubsampleDistribution& b) {
  if (a.n != b.n || a.m != b.m) {
    throw Error(ErrorKind::shape_mismatch, "subsample distributions have different (n, m)");
  }
  double total = 0.0;
  auto ita = a.masses.begin();
  auto itb = b.masses.begin();
  while (ita != a.masses.end() || itb != b.masses.end()) {
    if (itb == b.masses.end() || (ita != a.masses.end() && ita->first < itb->first)) {
      total += ita->second;
      ++ita;
    } else if (ita == a.masses.end() || itb->first < ita->first) {
      total += itb->second;
      ++itb;
    } else {
      total += std::fabs(ita->second - itb->second);
      ++ita;
      ++itb;
    }
  }
  return 0.5 * total;
}

// Scalable diagnostic: empirical probability that each individual lands in
// the treated subsample. Under the uniform benchmark every entry equals p.
struct InclusionSummary {
  std::vector<double> probs;
  double treated_fraction = 0.0;
  double max_abs_deviation = 0.0;
  std::uint64_t draws = 0;
};

inline InclusionSummary td_inclusion_probs(const PresentationCohort& cohort, std::uint64_t draws,
                                           SeededStream stream) {
  if (draws == 0) throw Error(ErrorKind::out_of_range, "draws must be >= 1");
  TdSampler sampler(cohort);
  Rng rng(stream);
  std::vector<std::uint64_t> hits(cohort.size(), 0);
  std::vector<int> subset;
  for (std::uint64_t i = 0; i < draws; ++i) {
    sampler.draw_into(rng, subset);
    for (int index : subset) ++hits[index];
  }
  InclusionSummary summary;
  summary.draws = draws;
  summary.treated_fraction = cohort.treated_fraction().value();
  summary.probs.resize(hits.size());
  for (std::size_t i = 0; i < hits.size(); ++i) {
    summary.probs[i] = static_cast<double>(hits[i]) / static_cast<double>(draws);
    summary.max_abs_deviation =
        std::max(summary.max_abs_deviation, std::fabs(summary.probs[i] - summary.treated_fraction));
  }
  return summary;
}

inline InclusionSummary inclusion_from_distribution(const SubsampleDistribution& dist,
                                                    double treated_fraction) {
  InclusionSummary summary;
  summary.draws = dist.draws;
  summary.treated_fraction = treated_fraction;
  summary.probs.assign(dist.n, 0.0);
  for (const auto& [subset, mass] : dist.masses) {
    for (int index : subset) summary.probs[index] += mass;
  }
  for (double& prob : summary.probs) {
    summary.max_abs_deviation =
        std::max(summary.max_abs_deviation, std::fabs(prob - treated_fraction));
  }
  return summary;
}

enum class DistanceKind { tv, inclusion };

struct KSweepPoint {
  double sigma = 0.0;
  double k = 0.0;
  double distance = 0.0;
  DistanceKind distance_kind = DistanceKind::tv;
};

// Rebuilds a truncated-normal cohort at each dispersion value and pairs the
// resulting K with a distance-from-uniform diagnostic: exact TV when the
// subset space is enumerable, max inclusion-probability deviation otherwise.
inline std::vector<KSweepPoint> k_sweep(const PresentationCohort& base,
                                        const std::vector<double>& sigmas, std::uint64_t draws,
                                        SeededStream stream,
                                        std::int64_t cap = kDefaultEnumerationCap) {
  if (sigmas.empty()) throw Error(ErrorKind::out_of_range, "k_sweep needs at least one sigma");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (!(sigmas[i] > 0.0)) throw Error(ErrorKind::out_of_range, "sigmas must be positive");
    if (i > 0 && !(sigmas[i] > sigmas[i - 1])) {
      throw Error(ErrorKind::out_of_range, "sigmas must be strictly increasing");
    }
  }
  std::vector<double> means;
  for (const auto& member : base.members()) {
    const auto* tn = std::get_if<TruncatedNormalMember>(&member);
    if (tn == nullptr) {
      throw Error(ErrorKind::out_of_range,
                  "k_sweep requires a cohort of truncated-normal members");
    }
    means.push_back(tn->mean);
  }

  const bool enumerable =
      subset_space_size(base.size(), base.subsample_size(), cap) <= cap;
  SubsampleDistribution uniform;
  if (enumerable) uniform = randomized_distribution(base.size(), base.subsample_size(), cap);

  Rng rng(stream);
  std::vector<KSweepPoint> points;
  std::vector<int> subset;
  for (double sigma : sigmas) {
    std::vector<MemberDistribution> members;
    members.reserve(means.size());
    for (double mean : means) members.push_back(TruncatedNormalMember{mean, sigma});
    PresentationCohort cohort(base.window(), std::move(members), base.treated_fraction());

    KSweepPoint point;
    point.sigma = sigma;
    point.k = compute_K(cohort).k;

    TdSampler sampler(cohort);
    if (enumerable) {
      SubsampleDistribution dist;
      dist.n = cohort.size();
      dist.m = cohort.subsample_size();
      dist.kind = SubsampleDistribution::Kind::empirical;
      dist.draws = draws;
      for (std::uint64_t i = 0; i < draws; ++i) {
        sampler.draw_into(rng, subset);
        ++dist.counts[subset];
      }
      for (const auto& [key, count] : dist.counts) {
        dist.masses[key] = static_cast<double>(count) / static_cast<double>(draws);
      }
      point.distance = tv_distance(dist, uniform);
      point.distance_kind = DistanceKind::tv;
    } else {
      std::vector<std::uint64_t> hits(cohort.size(), 0);
      for (std::uint64_t i = 0; i < draws; ++i) {
        sampler.draw_into(rng, subset);
        for (int index : subset) ++hits[index];
      }
      double max_dev = 0.0;
      for (auto h : hits) {
        const double prob = static_cast<double>(h) / static_cast<double>(draws);
        max_dev = std::max(max_dev, std::fabs(prob - cohort.treated_fraction().value()));
      }
      point.distance = max_dev;
      point.distance_kind = DistanceKind::inclusion;
    }
    points.push_back(point);
  }
  return points;
}

}  // namespace trialkit::tdesign
