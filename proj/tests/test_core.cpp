#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "trialkit/core.hpp"
#include "trialkit/normal.hpp"
#include "trialkit/random.hpp"
#include "trialkit/rational.hpp"

using namespace trialkit;

TEST_CASE("make_proportion accepts the unit interval and rejects the rest", "[core]") {
  CHECK(make_proportion(0.435).value() == 0.435);
  CHECK(make_proportion(0.0).value() == 0.0);
  CHECK(make_proportion(1.0).value() == 1.0);
  CHECK_THROWS_AS(make_proportion(1.2), Error);
  CHECK_THROWS_AS(make_proportion(-0.01), Error);
  try {
    make_proportion(1.2, "rj");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::out_of_range);
    CHECK(std::string(e.what()).find("rj") != std::string::npos);
  }
}

TEST_CASE("response_table_from_counts normalizes and derives rates", "[core]") {
  const auto symmetric = response_table_from_counts(1, 1, 1, 1);
  CHECK(symmetric.s() == 0.25);
  CHECK(symmetric.t() == 0.25);
  CHECK(symmetric.u() == 0.25);
  CHECK(symmetric.v() == 0.25);

  const auto all_affected = response_table_from_counts(0, 0, 5, 5);
  CHECK(all_affected.s() == 0.0);
  CHECK(all_affected.alpha().value() == 1.0);

  const auto mixed = response_table_from_counts(3, 1, 2, 4);
  CHECK(mixed.r_k().value() == Catch::Approx(0.5).margin(1e-15));
  CHECK(mixed.r_j().value() == Catch::Approx(0.7).margin(1e-15));
  CHECK(mixed.alpha().value() == Catch::Approx(0.6).margin(1e-15));

  CHECK_THROWS_AS(response_table_from_counts(0, 0, 0, 0), Error);
  try {
    response_table_from_counts(0, 0, 0, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::empty_table);
  }
}

TEST_CASE("response table complement identities", "[core]") {
  Rng rng(SeededStream{7, 0});
  for (int trial = 0; trial < 200; ++trial) {
    const auto counts = std::vector<std::int64_t>{
        static_cast<std::int64_t>(rng.next_u64() % 20), static_cast<std::int64_t>(rng.next_u64() % 20),
        static_cast<std::int64_t>(rng.next_u64() % 20), static_cast<std::int64_t>(rng.next_u64() % 20)};
    if (counts[0] + counts[1] + counts[2] + counts[3] == 0) continue;
    const auto table = response_table_from_counts(counts[0], counts[1], counts[2], counts[3]);
    CHECK((table.s() + table.u()) + (table.t() + table.v()) == Catch::Approx(1.0).margin(1e-12));
    CHECK((table.s() + table.v()) + (table.t() + table.u()) == Catch::Approx(1.0).margin(1e-12));
    const double alpha = table.alpha().value();
    const double rj = table.r_j().value();
    const double rk = table.r_k().value();
    CHECK(alpha >= std::fabs(rj - rk) - 1e-12);
    CHECK(alpha <= std::min(rj + rk, 1.0) + 1e-12);
  }
}

TEST_CASE("response_table_from_counts is scale invariant", "[core]") {
  for (const std::int64_t scale : {2, 3, 7, 100}) {
    const auto base = response_table_from_counts(3, 1, 2, 4);
    const auto scaled = response_table_from_counts(3 * scale, 1 * scale, 2 * scale, 4 * scale);
    CHECK(base.s() == scaled.s());
    CHECK(base.t() == scaled.t());
    CHECK(base.u() == scaled.u());
    CHECK(base.v() == scaled.v());
  }
}

TEST_CASE("cohort index validates labels", "[core]") {
  CohortIndex plain{3, std::nullopt};
  plain.validate();

  CohortIndex labeled{2, std::vector<std::string>{"a", "b"}};
  labeled.validate();

  CohortIndex duplicate{2, std::vector<std::string>{"a", "a"}};
  CHECK_THROWS_AS(duplicate.validate(), Error);
  CohortIndex short_labels{3, std::vector<std::string>{"a", "b"}};
  CHECK_THROWS_AS(short_labels.validate(), Error);
  CohortIndex empty{0, std::nullopt};
  CHECK_THROWS_AS(empty.validate(), Error);
}

TEST_CASE("seeded streams replay and separate", "[core]") {
  Rng a(SeededStream{42, 1});
  Rng b(SeededStream{42, 1});
  Rng c(SeededStream{42, 2});
  bool any_difference = false;
  for (int i = 0; i < 64; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    any_difference = any_difference || (va != c.next_u64());
  }
  CHECK(any_difference);
}

TEST_CASE("uniform01 stays inside the open interval", "[core]") {
  Rng rng(SeededStream{0, 0});
  for (int i = 0; i < 10'000; ++i) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("inverse normal CDF hits known quantiles and round-trips", "[core]") {
  CHECK(inverse_normal_cdf(0.5) == 0.0);
  CHECK(inverse_normal_cdf(0.975) == Catch::Approx(1.959963984540054).margin(1e-12));
  CHECK(inverse_normal_cdf(0.8413447460685429) == Catch::Approx(1.0).margin(1e-12));
  CHECK(inverse_normal_cdf(0.022750131948179195) == Catch::Approx(-2.0).margin(1e-12));

  for (double p = 1e-6; p < 1.0; p += 0.000937) {
    const double x = inverse_normal_cdf(p);
    CHECK(normal_cdf(x) == Catch::Approx(p).margin(1e-12));
  }
  // Deep tails exercise the outer rational approximation.
  for (const double p : {1e-12, 1e-9, 1.0 - 1e-9}) {
    const double x = inverse_normal_cdf(p);
    CHECK(normal_cdf(x) == Catch::Approx(p).epsilon(1e-9));
  }
}

TEST_CASE("rational arithmetic normalizes and compares exactly", "[core]") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(1) - Rational(2, 3) == Rational(1, 3));
  CHECK(Rational(-1, -2) == Rational(1, 2));
  CHECK(Rational(1, -2) == Rational(-1, 2));
  CHECK(Rational(3, 7) < Rational(1, 2));
  CHECK(abs(Rational(-3, 7)) == Rational(3, 7));
  CHECK((Rational(1, 3) / Rational(2)) == Rational(1, 6));
  CHECK(Rational(299, 300).to_double() == Catch::Approx(299.0 / 300.0));
}
