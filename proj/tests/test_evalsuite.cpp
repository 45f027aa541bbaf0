#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/normal.hpp>

#include "optree/errors.hpp"
#include "optree/evalsuite.hpp"

using namespace optree;

namespace {

const auto kLine = PartitionScheme::full_dyadic(1);

double overlap(double a, double b, double lo, double hi) { return std::max(0.0, std::min(b, hi) - std::max(a, lo)); }

double beta_cdf(double a, double b, double x) { return boost::math::cdf(boost::math::beta_distribution<>(a, b), x); }

double normal_cdf(double mean, double x) { return boost::math::cdf(boost::math::normal(mean, 0.1), x); }

// Independent bin probabilities: 64 bins on the line, 8 x 8 on the square.
double bin_probability(GeneratorKind kind, double x0, double x1, double y0 = 0.0, double y1 = 1.0) {
  switch (kind) {
    case GeneratorKind::SpikyUniforms:
      return 0.5 * overlap(x0, x1, 0.23, 0.232) / 0.002 + 0.5 * overlap(x0, x1, 0.233, 0.235) / 0.002;
    case GeneratorKind::BetaMixture:
      return 0.7 * (beta_cdf(40, 60, x1) - beta_cdf(40, 60, x0)) +
             0.3 * (beta_cdf(2000, 1000, x1) - beta_cdf(2000, 1000, x0));
    case GeneratorKind::UniformSemiBeta2D:
      return 0.35 * overlap(x0, x1, 0.78, 0.80) * overlap(y0, y1, 0.2, 0.8) / 0.012 +
             0.65 * overlap(x0, x1, 0.25, 0.4) / 0.15 * (beta_cdf(100, 120, y1) - beta_cdf(100, 120, y0));
    case GeneratorKind::BivariateNormal2D: {
      const double z = (normal_cdf(0.6, 1.0) - normal_cdf(0.6, 0.0)) * (normal_cdf(0.4, 1.0) - normal_cdf(0.4, 0.0));
      return (normal_cdf(0.6, x1) - normal_cdf(0.6, x0)) * (normal_cdf(0.4, y1) - normal_cdf(0.4, y0)) / z;
    }
    default:
      return 0.0;
  }
}

PiecewiseDensity uniform_density(std::size_t dims) {
  const auto s = PartitionScheme::full_dyadic(dims);
  return PiecewiseDensity{s, {DensityPiece{s.root(), 1.0}}};
}

PiecewiseDensity level_density(std::uint32_t level, const std::vector<double>& values) {
  PiecewiseDensity d{kLine, {}};
  for (std::uint64_t i = 0; i < values.size(); ++i) {
    const std::pair<std::uint32_t, std::uint64_t> iv[] = {{level, i}};
    d.pieces.push_back({Region::continuous(iv), values[i]});
  }
  return d;
}

}  // namespace

TEST_SUITE("evalsuite") {

TEST_CASE("generator component fractions") {
  constexpr std::size_t n = 1000000;
  const auto frac_se = [](double f) { return std::sqrt(f * (1.0 - f) / n); };

  const auto spiky = generate(GeneratorSpec::named(GeneratorKind::SpikyUniforms, 1), n, 4);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += spiky.point(i)[0] >= 0.23 && spiky.point(i)[0] < 0.232;
  CHECK(std::abs(hits / double(n) - 0.5) <= 3.0 * frac_se(0.5));

  const auto semi = generate(GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D, 2), n, 4);
  hits = 0;
  for (std::size_t i = 0; i < n; ++i) hits += semi.point(i)[0] >= 0.25 && semi.point(i)[0] <= 0.4;
  CHECK(std::abs(hits / double(n) - 0.65) <= 3.0 * frac_se(0.65));

  const auto beta = generate(GeneratorSpec::named(GeneratorKind::BetaMixture, 3), n, 4);
  double sum = 0.0, sum_sq = 0.0;
  for (double x : beta.coords) {
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sum_sq / n - mean * mean) / (n - 1));
  CHECK(std::abs(mean - 0.48) <= 3.0 * se);
}

TEST_CASE("generated points stay in the unit cube") {
  const auto bn = generate(GeneratorSpec::named(GeneratorKind::BivariateNormal2D, 4), 100000);
  CHECK(bn.rejections > 0);
  for (double v : bn.coords) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("generation is deterministic and thread independent") {
  const auto spec = GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D, 11);
  const auto a = generate(spec, 5000, 1);
  const auto b = generate(spec, 5000, 7);
  CHECK(a.coords == b.coords);
  CHECK(generate(spec, 10).coords == generate(spec, 10).coords);
  CHECK(generate(GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D, 12), 10).coords != generate(spec, 10).coords);
  CHECK_THROWS_AS(generate(spec, 0), ConfigError);
}

TEST_CASE("true density examples") {
  const auto spiky = GeneratorSpec::named(GeneratorKind::SpikyUniforms);
  const double a[] = {0.231}, b[] = {0.5};
  CHECK(true_density(spiky, a) == doctest::Approx(250.0).epsilon(1e-12));
  CHECK(true_density(spiky, b) == 0.0);
  const double c[] = {0.79, 0.5};
  CHECK(true_density(GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D), c) ==
        doctest::Approx(0.35 / 0.012).epsilon(1e-12));
  const double outside[] = {1.2};
  CHECK_THROWS_AS(true_density(spiky, outside), std::invalid_argument);
  const double wrong_dims[] = {0.5, 0.5};
  CHECK_THROWS_AS(true_density(spiky, wrong_dims), std::invalid_argument);
}

TEST_CASE("true densities integrate to one") {
  // Midpoint rules on grids aligned with every discontinuity.
  for (auto kind : {GeneratorKind::SpikyUniforms, GeneratorKind::BetaMixture}) {
    const auto spec = GeneratorSpec::named(kind);
    constexpr std::size_t cells = 1000000;
    double total = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      const double x[] = {(i + 0.5) / cells};
      total += true_density(spec, x);
    }
    CHECK(std::abs(total / cells - 1.0) < 1e-6);
  }
  for (auto [kind, cells] : {std::pair{GeneratorKind::UniformSemiBeta2D, std::size_t{1000}},
                             std::pair{GeneratorKind::BivariateNormal2D, std::size_t{2000}}}) {
    const auto spec = GeneratorSpec::named(kind);
    double total = 0.0;
    for (std::size_t i = 0; i < cells; ++i)
      for (std::size_t j = 0; j < cells; ++j) {
        const double x[] = {(i + 0.5) / cells, (j + 0.5) / cells};
        total += true_density(spec, x);
      }
    CHECK(std::abs(total / double(cells * cells) - 1.0) < 1e-6);
  }
}

TEST_CASE("normalizer of the truncated normal") {
  const double expected = (normal_cdf(0.6, 1.0) - normal_cdf(0.6, 0.0)) * (normal_cdf(0.4, 1.0) - normal_cdf(0.4, 0.0));
  CHECK(std::abs(normal_square_mass() - expected) < 1e-10);
}

TEST_CASE("histograms agree with the true density") {
  constexpr std::size_t n = 1000000;
  for (auto kind : {GeneratorKind::SpikyUniforms, GeneratorKind::BetaMixture, GeneratorKind::UniformSemiBeta2D,
                    GeneratorKind::BivariateNormal2D}) {
    CAPTURE(to_string(kind));
    const auto spec = GeneratorSpec::named(kind, 2024);
    const auto data = generate(spec, n, 4);
    std::vector<std::size_t> counts(64, 0);
    const bool square = spec.dims() == 2;
    const std::size_t per_axis = square ? 8 : 64;
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = data.point(i);
      std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(x[0] * per_axis), per_axis - 1);
      if (square) b = b * 8 + std::min<std::size_t>(static_cast<std::size_t>(x[1] * 8), 7);
      ++counts[b];
    }
    std::size_t outliers = 0;
    for (std::size_t b = 0; b < 64; ++b) {
      const std::size_t bx = square ? b / 8 : b;
      const std::size_t by = square ? b % 8 : 0;
      const double p = square ? bin_probability(kind, bx / 8.0, (bx + 1) / 8.0, by / 8.0, (by + 1) / 8.0)
                              : bin_probability(kind, bx / 64.0, (bx + 1) / 64.0);
      const double se = std::sqrt(p * (1.0 - p) / n);
      const double observed = counts[b] / double(n);
      if (p == 0.0) {
        CHECK(counts[b] == 0);
      } else if (std::abs(observed - p) > 3.0 * se) {
        ++outliers;
      }
    }
    CHECK(outliers == 0);
  }
}

TEST_CASE("exact L1 on the line") {
  const auto spiky = GeneratorSpec::named(GeneratorKind::SpikyUniforms);
  const auto uniform = GeneratorSpec::custom({UniformBox{1.0, {0.0}, {1.0}}});

  auto r = l1_distance(uniform_density(1), spiky);
  CHECK(r.exact);
  CHECK(r.value == doctest::Approx(1.992).epsilon(1e-12));
  CHECK(l1_distance(uniform_density(1), uniform).value == doctest::Approx(0.0));

  const auto dyadic = GeneratorSpec::custom({UniformBox{0.5, {0.25}, {0.5}}, UniformBox{0.5, {0.5}, {0.75}}});
  CHECK(l1_distance(level_density(2, {0.0, 2.0, 2.0, 0.0}), dyadic).value < 1e-14);
  CHECK(l1_distance(level_density(2, {0.0, 4.0, 0.0, 0.0}), dyadic).value == doctest::Approx(1.0).epsilon(1e-14));

  // Cell averages of the spiky truth at level 20.
  constexpr std::uint32_t level = 20;
  const double w = std::ldexp(1.0, -static_cast<int>(level));
  std::vector<double> values(std::size_t{1} << level);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = bin_probability(GeneratorKind::SpikyUniforms, i * w, (i + 1) * w) / w;
  const double raster = l1_distance(level_density(level, values), spiky).value;
  CHECK(raster > 0.0);
  CHECK(raster < 4.0 * 2.0 * 250.0 * w);

  const auto beta = GeneratorSpec::named(GeneratorKind::BetaMixture);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = bin_probability(GeneratorKind::BetaMixture, i * w, (i + 1) * w) / w;
  CHECK(l1_distance(level_density(level, values), beta).value < 1e-4);
  CHECK(l1_distance(uniform_density(1), beta).value > 1.0);
}

TEST_CASE("Monte Carlo L1 on the square") {
  const auto uniform = GeneratorSpec::custom({UniformBox{1.0, {0.0, 0.0}, {1.0, 1.0}}});
  auto r = l1_distance(uniform_density(2), uniform, 10000);
  CHECK_FALSE(r.exact);
  CHECK(r.value == doctest::Approx(0.0));

  const auto semi = GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D);
  r = l1_distance(uniform_density(2), semi, 200000);
  CHECK(r.std_error > 0.0);
  // Exact: 2 * (1 - mass where the truth is below 1) computed from the components.
  CHECK(r.value > 1.5);
  CHECK(r.value < 2.0);

  CHECK_THROWS(l1_distance(uniform_density(1), semi));
}

TEST_CASE("brute force examples") {
  const DataIndex one1(1, {1.0}, RegionKind::Discrete);
  auto v = brute_force_phi(1, one1, 0.5);
  CHECK(v.phi == Rational(1, 2));
  CHECK(v.trees == 2);

  const DataIndex one2(2, {2.0, 1.0}, RegionKind::Discrete);
  v = brute_force_phi(2, one2, 0.5);
  CHECK(v.phi == Rational(1, 4));
  CHECK(v.trees == 9);

  const DataIndex none(2, {}, RegionKind::Discrete);
  CHECK(brute_force_phi(2, none, 0.5).phi == 1);
  CHECK(brute_force_phi(3, DataIndex(3, {}, RegionKind::Discrete), 0.5).trees == 244);

  CHECK_THROWS(brute_force_phi(4, DataIndex(4, {}, RegionKind::Discrete), 0.5));
}

TEST_CASE("oracle agrees with the recursion on random tables") {
  std::size_t trials = 0;
  for (std::size_t p = 1; p <= 3; ++p)
    for (std::size_t n = 1; n <= 5; ++n) {
      const auto report = oracle_check(p, n, p == 3 ? 40 : 8, 1000 * p + n);
      CHECK(report.max_rel_error < kOracleTolerance);
      trials += report.trials;
    }
  CHECK(trials >= 200);
  CHECK(oracle_check(2, 3, 20, 5, 0.3).max_rel_error < kOracleTolerance);
  CHECK_THROWS_AS(oracle_check(4, 3, 1, 1), ConfigError);
  CHECK_THROWS_AS(oracle_check(2, 6, 1, 1), ConfigError);
  CHECK_THROWS_AS(oracle_check(2, 3, 0, 1), ConfigError);
}

TEST_CASE("table audit") {
  const auto data = generate(GeneratorSpec::named(GeneratorKind::SpikyUniforms, 8), 500);
  const DataIndex index(1, data.coords, RegionKind::Continuous);
  const auto spec = PriorSpec::optional_tree(kLine);
  const auto limits = RecursionLimits::defaults(1);
  PhiTable table;
  PhiSolver solver(index, spec, limits, table);
  solver.compute_log_phi(kLine.root());
  const auto report = audit_phi_table(table, spec);
  CHECK(report.checked > 0);
  CHECK(report.failures.empty());
  CHECK(report.max_abs_error <= 1e-12);
}

TEST_CASE("generator names") {
  CHECK(parse_generator("SpikyUniforms") == GeneratorKind::SpikyUniforms);
  CHECK(parse_generator("bivariate-normal-2d") == GeneratorKind::BivariateNormal2D);
  CHECK_THROWS_AS(parse_generator("gaussian"), ConfigError);
  CHECK_THROWS_AS(GeneratorSpec::custom({UniformBox{1.0, {0.5}, {0.2}}}).validate(), ConfigError);
}

}
