#include <doctest.h>

#include "oracles.hpp"

using namespace drmatch;
using drmatch::testing::brute_force_matches;
using drmatch::testing::Gen;

TEST_CASE("two units are forced to pair") {
  Matrix z(2, 1);
  z << 0.7, 0.2;
  Treatment w(2);
  w << 1, 0;
  const MatchResult r = build_matches(z, w, MatchSpec{});
  CHECK(r.matches[0] == std::vector<Index>{1});
  CHECK(r.matches[1] == std::vector<Index>{0});
  CHECK(r.usage_count == std::vector<int>{1, 1});
  CHECK(r.weights[0] == 2.0);
  CHECK(r.weights[1] == 2.0);
  CHECK(r.n_dropped == 0);
}

TEST_CASE("six-unit two-score example agrees with enumeration") {
  Matrix z(6, 2);
  z << 0.10, 1.0,
       0.30, 2.5,
       0.35, 0.2,
       0.80, 1.9,
       0.55, 3.1,
       0.20, 0.9;
  Treatment w(6);
  w << 1, 0, 1, 0, 1, 0;
  MatchSpec spec;
  spec.m = 2;
  const MatchResult r = build_matches(z, w, spec);
  CHECK(r.matches == brute_force_matches(z, w, 2, std::nullopt, true));
  for (const auto& set : r.matches) CHECK(set.size() == 2);
  for (Index u = 0; u < 6; ++u) {
    CHECK(r.weights[u] == doctest::Approx(1.0 + r.usage_count[static_cast<std::size_t>(u)] / 2.0));
  }
}

TEST_CASE("tiny caliper drops every unit") {
  Matrix z(6, 1);
  z << 0, 10, 20, 30, 40, 50;
  Treatment w(6);
  w << 1, 0, 1, 0, 1, 0;
  MatchSpec spec;
  spec.caliper_sd = 1e-6;
  const MatchResult r = build_matches(z, w, spec);
  CHECK(r.n_dropped == 6);
  const EffectiveSample s = effective_sample(r, w);
  CHECK(s.n_retained == 0);
  CHECK(s.n_dropped == 6);
  CHECK(r.weights.isZero());
}

TEST_CASE("no caliper drops nothing") {
  Gen g(3);
  const Matrix z = g.matrix(40, 2);
  const Treatment w = g.treatment(40);
  const MatchResult r = build_matches(z, w, MatchSpec{});
  CHECK(r.n_dropped == 0);
  CHECK(effective_sample(r, w).n_dropped == 0);
}

TEST_CASE("effective sample counts agree with the retained flags") {
  Gen g(4);
  const Matrix z = g.matrix(60, 2);
  const Treatment w = g.treatment(60);
  MatchSpec spec;
  spec.caliper_sd = 0.1;
  const MatchResult r = build_matches(z, w, spec);
  Index kept = 0, kept_t = 0, kept_c = 0;
  for (Index i = 0; i < 60; ++i) {
    if (!r.retained[static_cast<std::size_t>(i)]) continue;
    ++kept;
    ++(w[i] == 1 ? kept_t : kept_c);
  }
  const EffectiveSample s = effective_sample(r, w);
  CHECK(s.n_retained == kept);
  CHECK(s.n_dropped == 60 - kept);
  CHECK(s.retained_treated == kept_t);
  CHECK(s.retained_control == kept_c);
  CHECK(r.n_dropped == s.n_dropped);
}

TEST_CASE("ATT matches only treated units") {
  Gen g(5);
  const Matrix z = g.matrix(30, 1);
  const Treatment w = g.treatment(30);
  MatchSpec spec;
  spec.estimand = Estimand::att;
  const MatchResult r = build_matches(z, w, spec);
  for (Index i = 0; i < 30; ++i) {
    if (w[i] == 0) {
      CHECK(r.matches[static_cast<std::size_t>(i)].empty());
      CHECK_FALSE(r.retained[static_cast<std::size_t>(i)]);
    } else {
      CHECK(r.retained[static_cast<std::size_t>(i)]);
    }
  }
  CHECK(effective_sample(r, w).n_retained == w.sum());
  CHECK(r.matches == brute_force_matches(z, w, 1, std::nullopt, true, Estimand::att));
}

TEST_CASE("ties go to the smaller index") {
  Matrix z(5, 1);
  z << 0.0, 1.0, -1.0, 1.0, 5.0;
  Treatment w(5);
  w << 1, 0, 0, 0, 1;
  MatchSpec spec;
  spec.standardize_columns = false;
  const MatchResult r = build_matches(z, w, spec);
  CHECK(r.matches[0] == std::vector<Index>{1});
  spec.m = 2;
  const MatchResult r2 = build_matches(z, w, spec);
  CHECK(r2.matches[0] == std::vector<Index>{1, 2});
  CHECK(r2.matches[4] == std::vector<Index>{1, 3});
}

TEST_CASE("fewer admissible candidates than M keeps the subset") {
  Matrix z(5, 1);
  z << 0.0, 0.05, 3.0, 3.1, 0.02;
  Treatment w(5);
  w << 1, 0, 0, 0, 1;
  MatchSpec spec;
  spec.m = 3;
  spec.caliper_sd = 0.2;
  const MatchResult r = build_matches(z, w, spec);
  CHECK(r.matches[0] == std::vector<Index>{1});
  CHECK(r.retained[0]);
  CHECK(r.matches[1] == std::vector<Index>{4, 0});
  CHECK_FALSE(r.retained[2]);
  CHECK(r.weights[1] == 3.0);
  CHECK(r.weights[0] == 1.5);
}

TEST_CASE("invalid inputs") {
  Matrix z(4, 1);
  z << 1, 2, 3, 4;
  Treatment all_treated = Treatment::Ones(4);
  CHECK_THROWS_AS(build_matches(z, all_treated, MatchSpec{}), DataError);
  Treatment w(4);
  w << 1, 0, 1, 0;
  MatchSpec bad;
  bad.m = 0;
  CHECK_THROWS_AS(build_matches(z, w, bad), ConfigError);
  bad.m = 1;
  bad.caliper_sd = -0.5;
  CHECK_THROWS_AS(build_matches(z, w, bad), ConfigError);
  CHECK_THROWS_AS(build_matches(z, Treatment::Zero(3), MatchSpec{}), DataError);
}

TEST_CASE("zero-variance score column uses sd one with a warning") {
  Matrix z(4, 2);
  z << 1, 7, 2, 7, 3, 7, 4, 7;
  Treatment w(4);
  w << 1, 0, 1, 0;
  MatchSpec spec;
  spec.caliper_sd = 0.5;
  const MatchResult r = build_matches(z, w, spec);
  CHECK(r.column_scales[1] == 1.0);
  CHECK_FALSE(r.warnings.empty());
  CHECK(r.matches == brute_force_matches(z, w, 1, 0.5, true));
}

TEST_CASE("score sets convert to a matrix") {
  ScoreSet s;
  s.columns.push_back({ScoreKind::propensity, Vector::LinSpaced(4, 0.1, 0.4)});
  s.columns.push_back({ScoreKind::prognostic, Vector::LinSpaced(4, 1.0, 4.0)});
  const Matrix z = score_matrix(s);
  CHECK(z.rows() == 4);
  CHECK(z.cols() == 2);
  CHECK(z(3, 1) == 4.0);
  Treatment w(4);
  w << 1, 0, 0, 1;
  CHECK(build_matches(s, w, MatchSpec{}).matches == build_matches(z, w, MatchSpec{}).matches);
  CHECK_THROWS_AS(score_matrix(ScoreSet{}), ConfigError);
}
