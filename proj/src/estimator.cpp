#include "optree/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace optree {

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::PosteriorStop: return "posterior_stop";
    case StopReason::PrecisionStop: return "precision_stop";
    case StopReason::EmptyRegion: return "empty_region";
  }
  return "unknown";
}

// --- TreeTopology ------------------------------------------------------------

std::vector<std::size_t> TreeTopology::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].leaf) out.push_back(i);
  }
  return out;
}

std::size_t TreeTopology::depth() const {
  std::size_t deepest = 0;
  for (const auto& node : nodes) deepest = std::max<std::size_t>(deepest, node.region.level());
  return deepest;
}

void TreeTopology::validate() const {
  if (nodes.empty()) throw std::logic_error("tree has no nodes");
  if (nodes.front().region != scheme.root()) throw std::logic_error("tree root is not the domain");
  double leaf_measure = 0.0;
  for (const auto& node : nodes) {
    if (node.leaf) {
      leaf_measure += measure(node.region);
      continue;
    }
    const auto kids = split(scheme, node.region, node.split);
    if (node.children[0] >= nodes.size() || node.children[1] >= nodes.size() ||
        nodes[node.children[0]].region != kids.left || nodes[node.children[1]].region != kids.right) {
      throw std::logic_error("internal node children do not match its split");
    }
    if (nodes[node.children[0]].count + nodes[node.children[1]].count != node.count) {
      throw std::logic_error("child counts do not add up to the parent count");
    }
  }
  if (leaf_measure != measure(scheme.root())) throw std::logic_error("tree leaves do not tile the domain");
}

// --- PiecewiseDensity --------------------------------------------------------

double PiecewiseDensity::integral() const {
  double total = 0.0;
  for (const auto& piece : pieces) total += piece.density * measure(piece.region);
  return total;
}

void PiecewiseDensity::validate(double tol) const {
  double covered = 0.0;
  for (const auto& piece : pieces) {
    if (!(piece.density >= 0.0) || !std::isfinite(piece.density)) {
      throw std::logic_error("invalid density value at " + piece.region.to_string());
    }
    covered += measure(piece.region);
  }
  if (covered != measure(scheme.root())) throw std::logic_error("density pieces do not tile the domain");
  if (std::abs(integral() - 1.0) > tol) {
    throw std::logic_error("density integrates to " + std::to_string(integral()) + ", not 1");
  }
}

// --- DensityLocator ----------------------------------------------------------

namespace {

// Odometer step over the box [lo, hi]; returns true once every cell was visited.
bool advance(std::vector<std::size_t>& cur, const std::vector<std::size_t>& lo, const std::vector<std::size_t>& hi) {
  for (std::size_t d = cur.size(); d > 0; --d) {
    if (cur[d - 1] < hi[d - 1]) {
      ++cur[d - 1];
      return false;
    }
    cur[d - 1] = lo[d - 1];
  }
  return true;
}

}  // namespace

DensityLocator::DensityLocator(const PiecewiseDensity& density) : density_(density) {
  const auto& pieces = density_.pieces;
  const std::size_t p = density_.scheme.dims;
  if (density_.scheme.region_kind() == RegionKind::Discrete) {
    buckets_.emplace_back();
    for (std::size_t i = 0; i < pieces.size(); ++i) buckets_[0].push_back(i);
    return;
  }
  const std::size_t total_bits_cap = p == 1 ? 20 : 18;
  const std::size_t wanted = std::max<std::size_t>(pieces.size(), 1);
  std::size_t bits = (static_cast<std::size_t>(std::bit_width(wanted)) + p - 1) / p;
  bits = std::clamp<std::size_t>(bits, 1, total_bits_cap / p);
  per_dim_ = std::size_t{1} << bits;
  std::size_t total = 1;
  for (std::size_t d = 0; d < p; ++d) total *= per_dim_;
  buckets_.resize(total);

  const double scale = static_cast<double>(per_dim_);
  std::vector<std::size_t> lo(p), hi(p), cur(p);
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    const Region& r = pieces[i].region;
    for (std::size_t d = 0; d < p; ++d) {
      lo[d] = static_cast<std::size_t>(std::floor(r.lower(d) * scale));
      hi[d] = std::min(per_dim_ - 1, static_cast<std::size_t>(std::ceil(r.upper(d) * scale)) - 1);
      hi[d] = std::max(hi[d], lo[d]);
      cur[d] = lo[d];
    }
    bool done = false;
    while (!done) {
      std::size_t flat = 0;
      for (std::size_t d = 0; d < p; ++d) flat = flat * per_dim_ + cur[d];
      buckets_[flat].push_back(i);
      done = advance(cur, lo, hi);
    }
  }
}

std::size_t DensityLocator::piece_index(std::span<const double> x) const {
  const std::size_t p = density_.scheme.dims;
  std::size_t flat = 0;
  if (density_.scheme.region_kind() == RegionKind::Continuous) {
    if (x.size() != p) throw std::invalid_argument("point dimension mismatch");
    for (std::size_t d = 0; d < p; ++d) {
      if (!(x[d] >= 0.0 && x[d] <= 1.0)) throw std::invalid_argument("point outside the unit cube");
      const auto b = std::min(per_dim_ - 1, static_cast<std::size_t>(x[d] * static_cast<double>(per_dim_)));
      flat = flat * per_dim_ + b;
    }
  }
  for (auto i : buckets_[flat]) {
    if (density_.pieces[i].region.contains(x)) return i;
  }
  throw std::invalid_argument("point not covered by any density piece");
}

double DensityLocator::operator()(std::span<const double> x) const { return density_.pieces[piece_index(x)].density; }

// --- estimators --------------------------------------------------------------

void require_unique_split(const PartitionScheme& scheme) {
  const bool unique = scheme.kind == SchemeKind::Cycling || scheme.dims == 1;
  if (!unique) {
    throw std::invalid_argument("the dichotomous posterior mean needs a unique split per region; scheme '" +
                                to_string(scheme.kind) + "' with p = " + std::to_string(scheme.dims) +
                                " has several (use the hmap estimator or the cycling scheme)");
  }
}

namespace {

bool forced_leaf(const PhiEntry& e) {
  return e.terminal == TerminalKind::PrecisionStop || e.terminal == TerminalKind::SingleCell;
}

struct DichotomousWalk {
  PhiSolver& solver;
  std::uint32_t depth;
  bool collapse_empty;
  std::vector<NodeMass> out;

  void descend(const Region& region, std::vector<std::uint32_t> idx, double a, double b) {
    const PhiEntry& e = solver.ensure(region, idx);
    if (forced_leaf(e) || region.level() >= depth || (collapse_empty && e.count == 0)) {
      out.push_back({region, a, b});
      return;
    }
    const auto& scheme = solver.spec().scheme;
    const auto kids = split(scheme, region, 0);
    std::vector<std::uint32_t> left, right;
    solver.partition(region, 0, idx, left, right);
    const BetaPair pa = e.post_alpha.at(0);
    const double total = pa.sum();
    const double parent_measure = measure(region);

    const double mean_left = pa.left / total;
    const double mean_right = pa.right / total;
    const double rho_left = solver.ensure(kids.left, left).post_rho;
    const double rho_right = solver.ensure(kids.right, right).post_rho;

    const double a_left = (measure(kids.left) / parent_measure) * a + mean_left * rho_left * b;
    const double b_left = mean_left * (1.0 - rho_left) * b;
    const double a_right = (measure(kids.right) / parent_measure) * a + mean_right * rho_right * b;
    const double b_right = mean_right * (1.0 - rho_right) * b;

    descend(kids.left, std::move(left), a_left, b_left);
    descend(kids.right, std::move(right), a_right, b_right);
  }

  void run() {
    require_unique_split(solver.spec().scheme);
    const Region root = solver.spec().scheme.root();
    auto idx = solver.data().all_indices();
    const double a0 = solver.ensure(root, idx).post_rho;
    descend(root, std::move(idx), a0, 1.0 - a0);
  }
};

}  // namespace

PiecewiseDensity mean_density_dichotomous(PhiSolver& solver, std::uint32_t query_depth) {
  DichotomousWalk walk{solver, query_depth, true, {}};
  walk.run();
  PiecewiseDensity out;
  out.scheme = solver.spec().scheme;
  out.pieces.reserve(walk.out.size());
  for (auto& node : walk.out) {
    out.pieces.push_back({node.region, (node.stopped + node.unstopped) / measure(node.region)});
  }
  return out;
}

std::vector<NodeMass> dichotomous_masses(PhiSolver& solver, std::uint32_t depth) {
  DichotomousWalk walk{solver, depth, false, {}};
  walk.run();
  return std::move(walk.out);
}

TreeTopology hmap_tree(PhiSolver& solver) {
  TreeTopology tree;
  tree.scheme = solver.spec().scheme;

  struct Pending {
    std::size_t node;
    std::vector<std::uint32_t> idx;
  };
  tree.nodes.push_back({tree.scheme.root()});
  std::vector<Pending> stack;
  stack.push_back({0, solver.data().all_indices()});

  // Depth-first, left child first, so node numbering is deterministic.
  while (!stack.empty()) {
    Pending item = std::move(stack.back());
    stack.pop_back();
    const Region region = tree.nodes[item.node].region;
    const PhiEntry& e = solver.ensure(region, item.idx);
    TreeNode& node = tree.nodes[item.node];
    node.count = e.count;
    if (forced_leaf(e)) {
      node.reason = StopReason::PrecisionStop;
      continue;
    }
    if (e.post_rho >= 0.5) {
      node.reason = StopReason::PosteriorStop;
      continue;
    }
    if (e.count == 0) {
      node.reason = StopReason::EmptyRegion;
      continue;
    }
    const auto best = static_cast<std::size_t>(
        std::distance(e.post_lambda.begin(), std::max_element(e.post_lambda.begin(), e.post_lambda.end())));
    const auto kids = split(tree.scheme, region, best);
    std::vector<std::uint32_t> left, right;
    solver.partition(region, best, item.idx, left, right);

    const std::size_t left_id = tree.nodes.size();
    node.leaf = false;
    node.split = best;
    node.split_dim = split_dimension(tree.scheme, region, best);
    node.children = {left_id, left_id + 1};
    tree.nodes.push_back({kids.left});
    tree.nodes.push_back({kids.right});
    stack.push_back({left_id + 1, std::move(right)});
    stack.push_back({left_id, std::move(left)});
  }
  return tree;
}

PiecewiseDensity conditional_mean_density(const TreeTopology& tree, const PhiTable& table) {
  PiecewiseDensity out;
  out.scheme = tree.scheme;
  if (tree.nodes.empty()) throw std::invalid_argument("empty tree");
  std::vector<double> mass(tree.nodes.size(), 0.0);
  mass[0] = 1.0;
  // Children always follow their parent in the node array.
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const TreeNode& node = tree.nodes[i];
    if (node.leaf) {
      out.pieces.push_back({node.region, mass[i] / measure(node.region)});
      continue;
    }
    const PhiEntry* e = table.find(canonical_key(node.region));
    if (e == nullptr || node.split >= e->post_alpha.size()) {
      throw std::invalid_argument("tree node " + node.region.to_string() + " is missing from the table");
    }
    const BetaPair pa = e->post_alpha[node.split];
    const double total = pa.sum();
    mass[node.children[0]] = mass[i] * (pa.left / total);
    mass[node.children[1]] = mass[i] * (pa.right / total);
  }
  return out;
}

double hutter_point_density(std::span<const double> x, PhiSolver& solver) {
  const Region root = solver.spec().scheme.root();
  if (!root.contains(x)) throw std::invalid_argument("query point lies outside the domain");
  const double base = solver.ensure(root).log_phi;
  return std::exp(solver.log_phi_with_extra_point(x) - base);
}

std::vector<double> hutter_point_densities(const std::vector<std::vector<double>>& points, PhiSolver& solver,
                                           std::size_t threads) {
  const Region root = solver.spec().scheme.root();
  const double base = solver.ensure(root).log_phi;
  std::vector<double> out(points.size());
  auto work = [&](std::size_t begin, std::size_t stride) {
    for (std::size_t i = begin; i < points.size(); i += stride) {
      out[i] = std::exp(solver.log_phi_with_extra_point(points[i]) - base);
    }
  };
  threads = std::max<std::size_t>(threads, 1);
  if (threads == 1) {
    work(0, 1);
    return out;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  for (auto& th : pool) th.join();
  return out;
}

// --- grids -------------------------------------------------------------------

std::size_t default_grid_resolution(std::size_t dims) { return dims <= 1 ? 4096 : 256; }

DensityGrid make_grid(std::size_t dims, std::size_t resolution, bool discrete) {
  if (dims == 0) throw std::invalid_argument("grid needs at least one dimension");
  if (discrete) resolution = 2;
  if (resolution == 0) throw std::invalid_argument("grid resolution must be positive");
  DensityGrid grid;
  grid.dims = dims;
  grid.resolution = resolution;
  grid.discrete = discrete;
  std::size_t cells = 1;
  for (std::size_t d = 0; d < dims; ++d) cells *= resolution;
  grid.values.assign(cells, 0.0);
  return grid;
}

std::vector<std::size_t> DensityGrid::cell_coords(std::size_t flat) const {
  std::vector<std::size_t> c(dims);
  for (std::size_t d = dims; d > 0; --d) {
    c[d - 1] = flat % resolution;
    flat /= resolution;
  }
  return c;
}

double DensityGrid::cell_lower(std::size_t i) const {
  return discrete ? static_cast<double>(i + 1) : static_cast<double>(i) / static_cast<double>(resolution);
}

double DensityGrid::cell_upper(std::size_t i) const {
  return discrete ? static_cast<double>(i + 1) : static_cast<double>(i + 1) / static_cast<double>(resolution);
}

std::vector<double> DensityGrid::cell_center(std::size_t flat) const {
  auto c = cell_coords(flat);
  std::vector<double> x(dims);
  for (std::size_t d = 0; d < dims; ++d) x[d] = discrete ? cell_lower(c[d]) : 0.5 * (cell_lower(c[d]) + cell_upper(c[d]));
  return x;
}

DensityGrid density_grid(const PiecewiseDensity& density, std::size_t resolution) {
  const std::size_t p = density.scheme.dims;
  const bool discrete = density.scheme.region_kind() == RegionKind::Discrete;
  DensityGrid grid = make_grid(p, resolution, discrete);
  if (discrete) {
    DensityLocator locate(density);
    for (std::size_t flat = 0; flat < grid.cell_count(); ++flat) grid.values[flat] = locate(grid.cell_center(flat));
    return grid;
  }
  const double r = static_cast<double>(grid.resolution);
  const double cell_volume = std::pow(1.0 / r, static_cast<double>(p));
  std::vector<std::size_t> lo(p), hi(p), cur(p);
  for (const auto& piece : density.pieces) {
    for (std::size_t d = 0; d < p; ++d) {
      lo[d] = static_cast<std::size_t>(std::floor(piece.region.lower(d) * r));
      hi[d] = std::min(grid.resolution - 1, static_cast<std::size_t>(std::ceil(piece.region.upper(d) * r)) - 1);
      hi[d] = std::max(hi[d], lo[d]);
      cur[d] = lo[d];
    }
    bool done = false;
    while (!done) {
      std::size_t flat = 0;
      double overlap = 1.0;
      for (std::size_t d = 0; d < p; ++d) {
        flat = flat * grid.resolution + cur[d];
        const double a = std::max(piece.region.lower(d), grid.cell_lower(cur[d]));
        const double b = std::min(piece.region.upper(d), grid.cell_upper(cur[d]));
        overlap *= std::max(0.0, b - a);
      }
      grid.values[flat] += piece.density * overlap / cell_volume;
      done = advance(cur, lo, hi);
    }
  }
  return grid;
}

}  // namespace optree
