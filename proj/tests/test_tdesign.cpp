#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "trialkit/tdesign.hpp"

using namespace trialkit;
using namespace trialkit::tdesign;

namespace {

PresentationCohort iid_cohort(int n, double p, double mean = 0.5, double sd = 0.25) {
  std::vector<MemberDistribution> members(n, TruncatedNormalMember{mean, sd});
  return PresentationCohort(TimeWindow{0.0, 1.0}, std::move(members), Proportion(p, "p"));
}

PresentationCohort quartile_cohort(double sd) {
  std::vector<MemberDistribution> members = {
      TruncatedNormalMember{0.2, sd}, TruncatedNormalMember{0.4, sd},
      TruncatedNormalMember{0.6, sd}, TruncatedNormalMember{0.8, sd}};
  return PresentationCohort(TimeWindow{0.0, 1.0}, std::move(members), Proportion(0.5, "p"));
}

}  // namespace

TEST_CASE("cohort construction enforces the treated-subsample contract", "[tdesign]") {
  CHECK(iid_cohort(4, 0.5).subsample_size() == 2);
  CHECK(iid_cohort(3, 1.0).subsample_size() == 3);
  CHECK_THROWS_AS(iid_cohort(3, 0.5), Error);    // 1.5 treated is not a subset size
  CHECK_THROWS_AS(iid_cohort(4, 0.0), Error);    // empty treated group
  CHECK_THROWS_AS(iid_cohort(1, 1.0), Error);    // n >= 2
  CHECK_THROWS_AS(PresentationCohort(TimeWindow{1.0, 0.0}, {}, Proportion(0.5, "p")), Error);

  std::vector<MemberDistribution> outside = {UniformMember{-0.5, 0.5}, UniformMember{0.0, 1.0}};
  CHECK_THROWS_AS(
      PresentationCohort(TimeWindow{0.0, 1.0}, std::move(outside), Proportion(0.5, "p")), Error);
}

TEST_CASE("design parameter K divides the minimum variance by the length", "[tdesign]") {
  // Twelve-year window, all member variances 4: width 4*sqrt(3) uniforms.
  const double width = 4.0 * std::sqrt(3.0);
  std::vector<MemberDistribution> members = {UniformMember{1.0, 1.0 + width},
                                             UniformMember{3.0, 3.0 + width},
                                             UniformMember{12.0 - width, 12.0}};
  PresentationCohort cohort(TimeWindow{0.0, 12.0}, std::move(members),
                            Proportion(1.0 / 3.0, "p"));
  const auto design = compute_K(cohort);
  CHECK(design.sigma2_min == Catch::Approx(4.0).margin(1e-12));
  CHECK(design.length == 12.0);
  CHECK(design.k == Catch::Approx(1.0 / 3.0).margin(1e-12));

  // Uniform members on the whole window: sigma2 = len^2/12, K = len/12.
  std::vector<MemberDistribution> full = {UniformMember{0.0, 2.0}, UniformMember{0.0, 2.0}};
  PresentationCohort full_cohort(TimeWindow{0.0, 2.0}, std::move(full), Proportion(0.5, "p"));
  const auto full_design = compute_K(full_cohort);
  CHECK(full_design.sigma2_min == Catch::Approx(4.0 / 12.0).margin(1e-12));
  CHECK(full_design.k == Catch::Approx(2.0 / 12.0).margin(1e-12));

  // One essentially degenerate member drags the minimum to zero.
  std::vector<MemberDistribution> narrow = {UniformMember{0.0, 2.0},
                                            UniformMember{1.0, 1.0 + 1e-9}};
  PresentationCohort narrow_cohort(TimeWindow{0.0, 2.0}, std::move(narrow), Proportion(0.5, "p"));
  CHECK(compute_K(narrow_cohort).k <= 1e-12);
}

TEST_CASE("member variances stay below the interval bound", "[tdesign]") {
  const TimeWindow window{0.0, 1.0};
  const double bound = 0.25;  // len^2 / 4
  for (double mean : {-0.5, 0.0, 0.3, 0.5, 1.0, 1.7}) {
    for (double sd : {0.01, 0.1, 0.5, 3.0, 100.0}) {
      const double variance = member_variance(TruncatedNormalMember{mean, sd}, window);
      CHECK(variance > 0.0);
      CHECK(variance <= bound + 1e-12);
    }
  }
  // Enormous dispersion truncates to approximately uniform.
  CHECK(member_variance(TruncatedNormalMember{0.5, 1000.0}, window) ==
        Catch::Approx(1.0 / 12.0).epsilon(1e-4));
}

TEST_CASE("quantile tables integrate piecewise and reject malformed input", "[tdesign]") {
  QuantileTableMember linear{{0.0, 1.0}, {0.0, 1.0}};  // uniform in disguise
  CHECK(member_variance(linear, TimeWindow{0.0, 1.0}) == Catch::Approx(1.0 / 12.0).margin(1e-12));

  QuantileTableMember refined{{0.0, 0.25, 0.5, 0.75, 1.0}, {0.0, 0.25, 0.5, 0.75, 1.0}};
  CHECK(member_variance(refined, TimeWindow{0.0, 1.0}) == Catch::Approx(1.0 / 12.0).margin(1e-12));

  QuantileTableMember backwards{{0.0, 0.6, 0.5, 1.0}, {0.0, 0.2, 0.4, 1.0}};
  CHECK_THROWS_AS(member_variance(backwards, TimeWindow{0.0, 1.0}), Error);
  try {
    member_variance(backwards, TimeWindow{0.0, 1.0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::variance_unavailable);
  }
  QuantileTableMember flat{{0.0, 0.5, 1.0}, {0.2, 0.2, 0.8}};
  CHECK_THROWS_AS(member_variance(flat, TimeWindow{0.0, 1.0}), Error);
}

TEST_CASE("disjoint supports make the treated subsample deterministic", "[tdesign]") {
  std::vector<MemberDistribution> members = {UniformMember{0.0, 0.4}, UniformMember{0.6, 1.0}};
  PresentationCohort cohort(TimeWindow{0.0, 1.0}, std::move(members), Proportion(0.5, "p"));
  Rng rng(SeededStream{3, 0});
  for (int i = 0; i < 200; ++i) {
    CHECK(sample_td_subsample(cohort, rng) == std::vector<int>{1});
  }
}

TEST_CASE("ordered means with tiny dispersion pick the latest member", "[tdesign]") {
  std::vector<MemberDistribution> members = {TruncatedNormalMember{0.25, 1e-3},
                                             TruncatedNormalMember{0.5, 1e-3},
                                             TruncatedNormalMember{0.75, 1e-3}};
  PresentationCohort cohort(TimeWindow{0.0, 1.0}, std::move(members), Proportion(1.0 / 3.0, "p"));
  const auto dist = td_distribution(cohort, 10'000, SeededStream{0, 0});
  CHECK(dist.masses.at({2}) > 0.99);
}

TEST_CASE("iid cohorts land uniformly on the subset space", "[tdesign]") {
  const auto dist = td_distribution(iid_cohort(4, 0.5), 1'000'000, SeededStream{0, 0});
  REQUIRE(dist.masses.size() == 6);
  std::uint64_t total = 0;
  for (const auto& [subset, count] : dist.counts) {
    CHECK(static_cast<double>(count) / 1e6 > 0.164);
    CHECK(static_cast<double>(count) / 1e6 < 0.169);
    total += count;
  }
  CHECK(total == 1'000'000);  // empirical frequencies are exact count ratios

  const auto uniform = randomized_distribution(4, 2);
  CHECK(tv_distance(dist, uniform) < 0.01);
}

TEST_CASE("randomized distribution enumerates uniformly", "[tdesign]") {
  const auto six = randomized_distribution(4, 2);
  REQUIRE(six.masses.size() == 6);
  for (const auto& [subset, mass] : six.masses) {
    CHECK(mass == Catch::Approx(1.0 / 6.0).margin(1e-15));
  }

  const auto single = randomized_distribution(3, 3);
  REQUIRE(single.masses.size() == 1);
  CHECK(single.masses.at({0, 1, 2}) == 1.0);

  const auto ten = randomized_distribution(5, 2);
  REQUIRE(ten.masses.size() == 10);
  for (const auto& [subset, mass] : ten.masses) CHECK(mass == Catch::Approx(0.1).margin(1e-15));
}

TEST_CASE("subset spaces above the cap are refused", "[tdesign]") {
  CHECK(subset_space_size(30, 15, 10'000) > 10'000);
  CHECK(subset_space_size(5, 2, 10'000) == 10);
  CHECK_THROWS_AS(randomized_distribution(30, 15), Error);
  try {
    td_distribution(iid_cohort(30, 0.5), 10, SeededStream{0, 0});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::space_too_large);
    CHECK(e.exit_status() == 4);
  }
}

TEST_CASE("tv distance is a metric on the subset space", "[tdesign]") {
  const auto uniform = randomized_distribution(4, 2);
  CHECK(tv_distance(uniform, uniform) == 0.0);

  SubsampleDistribution point;
  point.n = 2;
  point.m = 1;
  point.masses[{1}] = 1.0;
  const auto half = randomized_distribution(2, 1);
  CHECK(tv_distance(point, half) == Catch::Approx(0.5).margin(1e-15));
  CHECK(tv_distance(half, point) == Catch::Approx(0.5).margin(1e-15));

  CHECK_THROWS_AS(tv_distance(point, uniform), Error);

  // Triangle inequality on random triples over C(4, 2).
  Rng rng(SeededStream{11, 0});
  const auto random_dist = [&]() {
    SubsampleDistribution dist;
    dist.n = 4;
    dist.m = 2;
    double total = 0.0;
    std::vector<std::pair<std::vector<int>, double>> raw;
    for (const auto& [subset, mass] : randomized_distribution(4, 2).masses) {
      const double weight = rng.uniform01();
      raw.emplace_back(subset, weight);
      total += weight;
    }
    for (auto& [subset, weight] : raw) dist.masses[subset] = weight / total;
    return dist;
  };
  for (int trial = 0; trial < 50; ++trial) {
    const auto a = random_dist();
    const auto b = random_dist();
    const auto c = random_dist();
    CHECK(tv_distance(a, b) == Catch::Approx(tv_distance(b, a)).margin(1e-15));
    CHECK(tv_distance(a, c) <= tv_distance(a, b) + tv_distance(b, c) + 1e-12);
    CHECK(tv_distance(a, b) >= 0.0);
    CHECK(tv_distance(a, b) <= 1.0);
  }
}

TEST_CASE("relabeling members permutes the subset masses", "[tdesign]") {
  std::vector<MemberDistribution> ordered = {UniformMember{0.00, 0.1}, UniformMember{0.2, 0.3},
                                             UniformMember{0.4, 0.5}, UniformMember{0.6, 0.7}};
  std::vector<MemberDistribution> reversed(ordered.rbegin(), ordered.rend());
  PresentationCohort cohort(TimeWindow{0.0, 1.0}, std::move(ordered), Proportion(0.5, "p"));
  PresentationCohort relabeled(TimeWindow{0.0, 1.0}, std::move(reversed), Proportion(0.5, "p"));

  const auto dist = td_distribution(cohort, 1000, SeededStream{5, 0});
  const auto permuted = td_distribution(relabeled, 1000, SeededStream{5, 0});
  CHECK(dist.masses.at({2, 3}) == 1.0);      // the two latest members
  CHECK(permuted.masses.at({0, 1}) == 1.0);  // the same members, relabeled
}

TEST_CASE("inclusion probabilities flag departures from the treated fraction", "[tdesign]") {
  const auto iid = td_inclusion_probs(iid_cohort(4, 0.5), 200'000, SeededStream{0, 0});
  REQUIRE(iid.probs.size() == 4);
  for (const double prob : iid.probs) {
    CHECK(prob == Catch::Approx(0.5).margin(0.005));  // ~4.5 binomial sd
  }
  CHECK(iid.max_abs_deviation < 0.005);

  std::vector<MemberDistribution> members = {UniformMember{0.0, 0.4}, UniformMember{0.6, 1.0}};
  PresentationCohort disjoint(TimeWindow{0.0, 1.0}, std::move(members), Proportion(0.5, "p"));
  const auto split = td_inclusion_probs(disjoint, 2'000, SeededStream{0, 0});
  CHECK(split.probs[0] == 0.0);
  CHECK(split.probs[1] == 1.0);
  CHECK(split.max_abs_deviation == 0.5);

  const auto derived = inclusion_from_distribution(
      td_distribution(iid_cohort(4, 0.5), 50'000, SeededStream{1, 0}), 0.5);
  REQUIRE(derived.probs.size() == 4);
  for (const double prob : derived.probs) CHECK(prob == Catch::Approx(0.5).margin(0.01));
}

TEST_CASE("empirical distance to uniform shrinks with more draws", "[tdesign]") {
  const auto uniform = randomized_distribution(4, 2);
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto coarse = td_distribution(iid_cohort(4, 0.5), 100'000, SeededStream{seed, 0});
    const auto fine = td_distribution(iid_cohort(4, 0.5), 1'000'000, SeededStream{seed, 1});
    if (tv_distance(fine, uniform) < tv_distance(coarse, uniform)) ++improved;
  }
  CHECK(improved >= 9);
}

TEST_CASE("k-sweep distances fall as dispersion grows", "[tdesign]") {
  const std::vector<double> sigmas = {0.01, 0.05, 0.1, 0.25, 0.5};
  const auto points = k_sweep(quartile_cohort(0.1), sigmas, 20'000, SeededStream{0, 0});
  REQUIRE(points.size() == sigmas.size());

  std::vector<double> ks, distances;
  for (const auto& point : points) {
    CHECK(point.distance_kind == DistanceKind::tv);
    ks.push_back(point.k);
    distances.push_back(point.distance);
  }
  CHECK(testing::spearman(ks, distances) <= -0.9);
  CHECK(points.front().distance > 0.8);  // near-deterministic ordering at tiny sigma
  for (std::size_t i = 1; i < ks.size(); ++i) CHECK(ks[i] > ks[i - 1]);

  const auto replay = k_sweep(quartile_cohort(0.1), sigmas, 20'000, SeededStream{0, 0});
  for (std::size_t i = 0; i < points.size(); ++i) {
    CHECK(replay[i].distance == points[i].distance);
    CHECK(replay[i].k == points[i].k);
  }
}

TEST_CASE("k-sweep validates its ladder and member families", "[tdesign]") {
  CHECK_THROWS_AS(k_sweep(quartile_cohort(0.1), {0.2, 0.1}, 100, SeededStream{0, 0}), Error);
  CHECK_THROWS_AS(k_sweep(quartile_cohort(0.1), {}, 100, SeededStream{0, 0}), Error);
  CHECK_THROWS_AS(k_sweep(quartile_cohort(0.1), {-0.1, 0.2}, 100, SeededStream{0, 0}), Error);

  std::vector<MemberDistribution> uniforms = {UniformMember{0.0, 1.0}, UniformMember{0.0, 1.0}};
  PresentationCohort uniform_cohort(TimeWindow{0.0, 1.0}, std::move(uniforms),
                                    Proportion(0.5, "p"));
  CHECK_THROWS_AS(k_sweep(uniform_cohort, {0.1, 0.2}, 100, SeededStream{0, 0}), Error);
}

TEST_CASE("k-sweep falls back to inclusion deviations on large spaces", "[tdesign]") {
  std::vector<MemberDistribution> members;
  for (int i = 0; i < 30; ++i) {
    members.push_back(TruncatedNormalMember{(i + 1) / 31.0, 0.1});
  }
  PresentationCohort big(TimeWindow{0.0, 1.0}, std::move(members), Proportion(0.5, "p"));
  const auto points = k_sweep(big, {0.05, 0.5}, 2'000, SeededStream{0, 0});
  REQUIRE(points.size() == 2);
  CHECK(points[0].distance_kind == DistanceKind::inclusion);
  CHECK(points[0].distance > points[1].distance);
}
