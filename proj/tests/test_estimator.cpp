#include <doctest.h>

#include <cmath>
#include <random>

#include "optree/estimator.hpp"
#include "optree/evalsuite.hpp"
#include "optree/sampler.hpp"

using namespace optree;

namespace {

struct Fixture {
  DataIndex data;
  PriorSpec spec;
  RecursionLimits limits;
  PhiTable table;
  PhiSolver solver;

  Fixture(DataIndex d, PriorSpec s, RecursionLimits l, std::size_t threads = 1)
      : data(std::move(d)), spec(std::move(s)), limits(l), solver(data, spec, limits, table, threads) {
    solver.compute_log_phi(spec.scheme.root());
  }
};

DataIndex uniform_sample(std::size_t n, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> xs(n * dims);
  for (auto& x : xs) x = u(rng);
  return DataIndex(dims, xs, RegionKind::Continuous);
}

DataIndex from_dataset(const Dataset& d) { return DataIndex(d.dims, d.coords, RegionKind::Continuous); }

const auto kLine = PartitionScheme::full_dyadic(1);

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("no data gives the uniform posterior mean") {
  Fixture f(DataIndex(1, {}, RegionKind::Continuous), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto density = mean_density_dichotomous(f.solver, 3);
  for (const auto& piece : density.pieces) CHECK(piece.density == doctest::Approx(1.0).epsilon(1e-15));
  density.validate();
}

TEST_CASE("depth sums of a and b") {
  Fixture f(uniform_sample(200, 1, 17), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  for (std::uint32_t k = 1; k <= 12; ++k) {
    double total = 0.0;
    for (const auto& node : dichotomous_masses(f.solver, k)) total += node.stopped + node.unstopped;
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("single observation mean matches posterior draws") {
  Fixture f(DataIndex(1, {0.3}, RegionKind::Continuous), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto density = mean_density_dichotomous(f.solver, 40);
  density.validate();

  // Posterior mass of each quarter of the line, averaged over sampled measures.
  const PosteriorSource source(f.solver);
  constexpr std::size_t kDraws = 100000;
  std::array<double, 4> sum{}, sum_sq{};
  for (std::size_t i = 0; i < kDraws; ++i) {
    const auto draw = sample_measure(source, kLine, 12, 1000 + i);
    std::array<double, 4> q{};
    for (const auto& piece : draw.pieces) {
      const double lo = piece.region.lower(0);
      const double hi = piece.region.upper(0);
      for (int c = 0; c < 4; ++c) {
        const double overlap = std::max(0.0, std::min(hi, 0.25 * (c + 1)) - std::max(lo, 0.25 * c));
        q[c] += piece.mass * overlap / (hi - lo);
      }
    }
    for (int c = 0; c < 4; ++c) {
      sum[c] += q[c];
      sum_sq[c] += q[c] * q[c];
    }
  }
  for (int c = 0; c < 4; ++c) {
    double exact = 0.0;
    for (const auto& piece : density.pieces) {
      const double lo = piece.region.lower(0);
      const double hi = piece.region.upper(0);
      exact += piece.density * std::max(0.0, std::min(hi, 0.25 * (c + 1)) - std::max(lo, 0.25 * c));
    }
    const double mean = sum[c] / kDraws;
    const double se = std::sqrt((sum_sq[c] / kDraws - mean * mean) / (kDraws - 1));
    CHECK(std::abs(mean - exact) <= 3.0 * se);
  }
}

TEST_CASE("hmap with no data is a single leaf") {
  Fixture f(DataIndex(1, {}, RegionKind::Continuous), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto tree = hmap_tree(f.solver);
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].leaf);
  CHECK(tree.nodes[0].reason == StopReason::PosteriorStop);
  const auto density = conditional_mean_density(tree, f.table);
  REQUIRE(density.pieces.size() == 1);
  CHECK(density.pieces[0].density == 1.0);
}

TEST_CASE("hmap on the semi-Beta mixture splits the first coordinate at the root") {
  const auto data = generate(GeneratorSpec::named(GeneratorKind::UniformSemiBeta2D, 42), 10000);
  Fixture f(from_dataset(data), PriorSpec::optional_tree(PartitionScheme::full_dyadic(2)), RecursionLimits::defaults(2));
  const auto post = f.solver.posterior_params(f.spec.scheme.root());
  CHECK(post.post_lambda[0] > post.post_lambda[1]);
  const auto tree = hmap_tree(f.solver);
  CHECK_FALSE(tree.nodes[0].leaf);
  CHECK(tree.nodes[0].split_dim == 0);
  tree.validate();
  conditional_mean_density(tree, f.table).validate();
}

TEST_CASE("hmap tree does not depend on thread count") {
  const auto data = generate(GeneratorSpec::named(GeneratorKind::BivariateNormal2D, 5), 3000);
  Fixture f1(from_dataset(data), PriorSpec::optional_tree(PartitionScheme::full_dyadic(2)), RecursionLimits::defaults(2), 1);
  Fixture f8(from_dataset(data), PriorSpec::optional_tree(PartitionScheme::full_dyadic(2)), RecursionLimits::defaults(2), 8);
  const auto a = hmap_tree(f1.solver);
  const auto b = hmap_tree(f8.solver);
  REQUIRE(a.nodes.size() == b.nodes.size());
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    CHECK(a.nodes[i].region == b.nodes[i].region);
    CHECK(a.nodes[i].leaf == b.nodes[i].leaf);
    CHECK(a.nodes[i].split == b.nodes[i].split);
  }
}

TEST_CASE("conditional mean on small trees") {
  SUBCASE("single leaf") {
    Fixture f(DataIndex(1, {0.2, 0.4}, RegionKind::Continuous), PriorSpec::optional_tree(kLine),
              RecursionLimits::defaults(1));
    TreeTopology tree{kLine, {TreeNode{kLine.root(), 2}}};
    const auto d = conditional_mean_density(tree, f.table);
    REQUIRE(d.pieces.size() == 1);
    CHECK(d.pieces[0].density == 1.0);
  }
  SUBCASE("one split, three left and one right") {
    Fixture f(DataIndex(1, {0.1, 0.2, 0.3, 0.8}, RegionKind::Continuous), PriorSpec::optional_tree(kLine),
              RecursionLimits::defaults(1));
    const auto kids = split(kLine, kLine.root(), 0);
    TreeTopology tree{kLine, {}};
    tree.nodes.push_back({kLine.root(), 4, false, StopReason::PosteriorStop, 0, 0, {1, 2}});
    tree.nodes.push_back({kids.left, 3});
    tree.nodes.push_back({kids.right, 1});
    tree.validate();
    const auto d = conditional_mean_density(tree, f.table);
    CHECK(d.pieces[0].density * 0.5 == doctest::Approx(3.5 / 5.0).epsilon(1e-15));
    CHECK(d.pieces[1].density * 0.5 == doctest::Approx(1.5 / 5.0).epsilon(1e-15));
  }
  SUBCASE("balanced depth-two tree with symmetric data") {
    const auto sq = PartitionScheme::full_dyadic(2);
    const std::vector<double> xs{0.1, 0.1, 0.1, 0.9, 0.9, 0.1, 0.9, 0.9};
    Fixture f(DataIndex(2, xs, RegionKind::Continuous), PriorSpec::optional_tree(sq), RecursionLimits::defaults(2));
    const auto top = split(sq, sq.root(), 0);
    const auto l = split(sq, top.left, 1);
    const auto r = split(sq, top.right, 1);
    TreeTopology tree{sq, {}};
    tree.nodes.push_back({sq.root(), 4, false, StopReason::PosteriorStop, 0, 0, {1, 2}});
    tree.nodes.push_back({top.left, 2, false, StopReason::PosteriorStop, 1, 1, {3, 4}});
    tree.nodes.push_back({top.right, 2, false, StopReason::PosteriorStop, 1, 1, {5, 6}});
    for (const auto& leaf : {l.left, l.right, r.left, r.right}) tree.nodes.push_back({leaf, 1});
    tree.validate();
    for (const auto& piece : conditional_mean_density(tree, f.table).pieces)
      CHECK(piece.density * 0.25 == doctest::Approx(0.25).epsilon(1e-15));
  }
  SUBCASE("mismatched table") {
    PhiTable empty;
    const auto kids = split(kLine, kLine.root(), 0);
    TreeTopology tree{kLine, {}};
    tree.nodes.push_back({kLine.root(), 0, false, StopReason::PosteriorStop, 0, 0, {1, 2}});
    tree.nodes.push_back({kids.left});
    tree.nodes.push_back({kids.right});
    CHECK_THROWS_AS(conditional_mean_density(tree, empty), std::invalid_argument);
  }
}

TEST_CASE("conditional mean masses telescope") {
  const auto data = generate(GeneratorSpec::named(GeneratorKind::BetaMixture, 3), 2000);
  Fixture f(from_dataset(data), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto tree = hmap_tree(f.solver);
  const auto density = conditional_mean_density(tree, f.table);
  density.validate();
  // Mass inside each node from the pieces versus the product of Beta means on its path.
  std::vector<double> path(tree.nodes.size(), 1.0);
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.leaf) continue;
    const BetaPair a = f.solver.entry(node.region).post_alpha[node.split];
    path[node.children[0]] = path[i] * a.left / a.sum();
    path[node.children[1]] = path[i] * a.right / a.sum();
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    double inside = 0.0;
    for (const auto& piece : density.pieces)
      if (piece.region.lower(0) >= node.region.lower(0) && piece.region.upper(0) <= node.region.upper(0))
        inside += piece.density * measure(piece.region);
    CHECK(std::abs(inside - path[i]) < 1e-12);
  }
}

TEST_CASE("standard Polya tree never stops on the posterior") {
  const auto data = generate(GeneratorSpec::named(GeneratorKind::SpikyUniforms, 1), 500);
  Fixture f(from_dataset(data), PriorSpec::standard_polya_tree(kLine), RecursionLimits::defaults(1));
  const auto tree = hmap_tree(f.solver);
  for (auto i : tree.leaves()) {
    CHECK(tree.nodes[i].reason != StopReason::PosteriorStop);
    if (tree.nodes[i].reason == StopReason::PrecisionStop) CHECK(measure(tree.nodes[i].region) < 1e-6 * 2.0);
  }
  mean_density_dichotomous(f.solver, 48).validate();
}

TEST_CASE("Hutter density with no data") {
  Fixture f(DataIndex(2, {}, RegionKind::Continuous), PriorSpec::optional_tree(PartitionScheme::full_dyadic(2)),
            RecursionLimits::defaults(2));
  for (double x : {0.0, 0.3, 0.5, 1.0}) {
    const double pt[] = {x, 1.0 - x};
    CHECK(hutter_point_density(pt, f.solver) == doctest::Approx(1.0).epsilon(1e-14));
  }
  const double outside[] = {1.5, 0.0};
  CHECK_THROWS_AS(hutter_point_density(outside, f.solver), std::invalid_argument);
}

TEST_CASE("Hutter density integrates to one") {
  Fixture f(uniform_sample(50, 1, 23), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  constexpr std::size_t kCells = 1 << 14;
  std::vector<std::vector<double>> pts;
  for (std::size_t i = 0; i < kCells; ++i) pts.push_back({(i + 0.5) / kCells});
  double sum = 0.0;
  for (double v : hutter_point_densities(pts, f.solver, 4)) sum += v / kCells;
  CHECK(std::abs(sum - 1.0) < 1e-3);
}

TEST_CASE("Hutter density agrees with the dichotomous mean") {
  Fixture f(uniform_sample(50, 1, 29), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto mean = mean_density_dichotomous(f.solver, f.limits.max_level);
  const DensityLocator at(mean);
  double worst = 0.0;
  for (std::size_t i = 0; i < 256; ++i) {
    const double x[] = {(i + 0.5) / 256.0};
    const double h = hutter_point_density(x, f.solver);
    worst = std::max(worst, std::abs(h - at(x)) / at(x));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("density grids") {
  Fixture f(uniform_sample(300, 1, 31), PriorSpec::optional_tree(kLine), RecursionLimits::defaults(1));
  const auto density = mean_density_dichotomous(f.solver, 48);
  const auto grid = density_grid(density, 4096);
  double total = 0.0;
  for (double v : grid.values) total += v / 4096.0;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(default_grid_resolution(1) == 4096);
  CHECK(default_grid_resolution(2) == 256);
}

TEST_CASE("mean estimator needs a unique split") {
  Fixture f(uniform_sample(10, 2, 1), PriorSpec::optional_tree(PartitionScheme::full_dyadic(2)),
            RecursionLimits::defaults(2));
  CHECK_THROWS_AS(mean_density_dichotomous(f.solver, 10), std::invalid_argument);
  Fixture c(uniform_sample(100, 2, 1), PriorSpec::optional_tree(PartitionScheme::cycling(2)),
            RecursionLimits::defaults(2));
  mean_density_dichotomous(c.solver, 48).validate();
}

}
