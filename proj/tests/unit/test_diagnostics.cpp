#include <doctest.h>

#include <cmath>
#include <string>

#include "oracles.hpp"

using namespace drmatch;
using drmatch::testing::Gen;

TEST_CASE("ASMD hand examples") {
  Vector x(4);
  x << 1, 3, 0, 2;
  Treatment w(4);
  w << 1, 1, 0, 0;
  CHECK(asmd(x, w) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  Vector same(4);
  same << 1, 2, 1, 2;
  CHECK(asmd(same, w) == 0.0);
  CHECK(asmd(Vector::Constant(4, 3.5), w) == 0.0);

  Vector weights(4);
  weights << 3, 1, 1, 1;
  // Weighted treated mean 1.5, control mean 1, pooled sd from the unweighted sample.
  CHECK(asmd(x, w, &weights) == doctest::Approx(0.5 / 1.4142135623730951).epsilon(1e-14));
}

TEST_CASE("ASMD errors") {
  Treatment w(4);
  w << 1, 1, 0, 0;
  Vector degenerate(4);
  degenerate << 1, 1, 0, 0;
  CHECK_THROWS_WITH_AS(asmd(degenerate, w), "degenerate covariate", DataError);
  Vector x(4);
  x << 1, 2, 3, 4;
  Vector zero_treated(4);
  zero_treated << 0, 0, 1, 1;
  CHECK_THROWS_AS(asmd(x, w, &zero_treated), DataError);
  Vector negative(4);
  negative << -1, 1, 1, 1;
  CHECK_THROWS_AS(asmd(x, w, &negative), DataError);
  CHECK_THROWS_AS(asmd(x, Treatment::Ones(3)), DataError);
}

TEST_CASE("identity weights leave balance unchanged") {
  Gen g(1);
  const Matrix x = g.matrix(50, 6);
  const Treatment w = g.treatment(50, 0.5, 5);
  const Dataset data = make_dataset(g.vector(50), w, x);
  const BalanceReport r = balance_report(data, Vector::Ones(50));
  REQUIRE(r.covariates.size() == 6);
  for (const auto& c : r.covariates) CHECK(c.before == c.after);
  CHECK(r.before.mean == r.after.mean);
  CHECK(r.before.max == r.after.max);
}

TEST_CASE("report summaries follow their definitions") {
  Gen g(2);
  Matrix x = g.matrix(80, 5);
  const Treatment w = g.treatment(80, 0.5, 5);
  for (Index i = 0; i < 80; ++i) x(i, 0) += w[i] == 1 ? 1.0 : 0.0;
  const Dataset data = make_dataset(g.vector(80), w, x);
  const MatchResult m = build_matches(Matrix(x.col(0)), w, MatchSpec{});
  const BalanceReport r = balance_report(data, m);
  double mean_before = 0.0, mean_after = 0.0, max_after = 0.0, unb_before = 0.0, unb_after = 0.0;
  Index count = 0;
  for (Index j = 0; j < 5; ++j) {
    const auto& c = r.covariates[static_cast<std::size_t>(j)];
    CHECK(c.name == data.covariate_names[static_cast<std::size_t>(j)]);
    CHECK(c.before == asmd(x.col(j), w));
    CHECK(c.after == asmd(x.col(j), w, &m.weights));
    CHECK(c.before >= 0.0);
    CHECK(c.after >= 0.0);
    mean_before += c.before / 5.0;
    mean_after += c.after / 5.0;
    max_after = std::max(max_after, c.after);
    if (c.before > 0.1) {
      unb_before += c.before;
      unb_after += c.after;
      ++count;
    }
  }
  CHECK(r.before.mean == doctest::Approx(mean_before));
  CHECK(r.after.mean == doctest::Approx(mean_after));
  CHECK(r.after.max == max_after);
  CHECK(r.n_unbalanced == count);
  REQUIRE(count > 0);
  CHECK(r.before.unbalanced_mean == doctest::Approx(unb_before / count));
  CHECK(r.after.unbalanced_mean == doctest::Approx(unb_after / count));
  // Matching on the shifted covariate removes most of its imbalance.
  CHECK(r.covariates[0].after < r.covariates[0].before / 2.0);
}

TEST_CASE("no unbalanced covariates gives a NaN unbalanced mean") {
  Matrix x(4, 1);
  x << 1, 2, 1, 2;
  Treatment w(4);
  w << 1, 1, 0, 0;
  Gen g(3);
  const BalanceReport r = balance_report(make_dataset(g.vector(4), w, x), Vector::Ones(4));
  CHECK(r.n_unbalanced == 0);
  CHECK(std::isnan(r.before.unbalanced_mean));
  CHECK(std::isnan(r.after.unbalanced_mean));
}

TEST_CASE("balance plot is a self-contained SVG") {
  Gen g(4);
  const Matrix x = g.matrix(40, 3);
  const Treatment w = g.treatment(40, 0.5, 5);
  const BalanceReport r = balance_report(make_dataset(g.vector(40), w, x), Vector::Ones(40));
  const std::string svg = balance_svg(r, "a < b & c");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("a &lt; b &amp; c") != std::string::npos);
  CHECK(svg.find("<circle") != std::string::npos);
}
