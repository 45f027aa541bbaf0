#ifndef OPTREE_ESTIMATOR_HPP
#define OPTREE_ESTIMATOR_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "optree/geometry.hpp"
#include "optree/marginal.hpp"

namespace optree {

enum class StopReason : std::uint8_t {
  PosteriorStop,  // posterior stopping probability at or above one half
  PrecisionStop,  // below the precision threshold, at the level cap, or a single table cell
  EmptyRegion,    // no data; the conditional mean is uniform however the region is split
};

std::string to_string(StopReason reason);

struct TreeNode {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  Region region;
  std::uint64_t count = 0;
  bool leaf = true;
  StopReason reason = StopReason::PosteriorStop;
  std::size_t split = 0;      // 0-based split index, internal nodes only
  std::size_t split_dim = 0;  // coordinate bisected, internal nodes only
  std::array<std::size_t, 2> children{kNone, kNone};
};

/// Rooted binary tree stored as a flat node array; node 0 is the root.
struct TreeTopology {
  PartitionScheme scheme;
  std::vector<TreeNode> nodes;

  std::vector<std::size_t> leaves() const;
  std::size_t depth() const;
  /// Throws std::logic_error unless leaves tile the domain and every internal
  /// node's children are the split of its region.
  void validate() const;
};

struct DensityPiece {
  Region region;
  double density = 0.0;
};

/// Piecewise-constant density over a partition of the domain.
struct PiecewiseDensity {
  PartitionScheme scheme;
  std::vector<DensityPiece> pieces;

  /// Sum of density times measure.
  double integral() const;
  /// Throws std::logic_error when a density is negative or non-finite, the
  /// pieces do not tile the domain, or the integral is off by more than `tol`.
  void validate(double tol = 1e-8) const;
};

/// Point lookup for a PiecewiseDensity via a uniform bucket grid.
class DensityLocator {
 public:
  explicit DensityLocator(const PiecewiseDensity& density);
  double operator()(std::span<const double> x) const;
  std::size_t piece_index(std::span<const double> x) const;

 private:
  const PiecewiseDensity& density_;
  std::size_t per_dim_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

/// Posterior-mean density for schemes with a unique split per region, via the
/// a_i / b_i induction down each branch. Regions without data are emitted
/// whole (their mean is uniform); other branches stop at `query_depth` or at a
/// forced stop.
PiecewiseDensity mean_density_dichotomous(PhiSolver& solver, std::uint32_t query_depth);

/// (a, b) for every node at exactly `depth` (or above it, where a branch hits
/// a forced stop first). a + b is the posterior expected mass of the node.
struct NodeMass {
  Region region;
  double stopped = 0.0;    // a: mass whose stopping happened on or above the node
  double unstopped = 0.0;  // b: mass still splitting below the node
};
std::vector<NodeMass> dichotomous_masses(PhiSolver& solver, std::uint32_t depth);

/// Representative tree: stop where the posterior stopping probability is at
/// least one half, otherwise split along the most probable direction (lowest
/// index wins ties) and recurse.
TreeTopology hmap_tree(PhiSolver& solver);

/// Mean density conditional on a fixed tree: leaf masses are products of Beta
/// posterior means along the path, uniform within each leaf.
PiecewiseDensity conditional_mean_density(const TreeTopology& tree, const PhiTable& table);

/// Phi(Omega | data, x) / Phi(Omega | data).
double hutter_point_density(std::span<const double> x, PhiSolver& solver);

/// Hutter density at many points, evaluated with up to `threads` workers.
std::vector<double> hutter_point_densities(const std::vector<std::vector<double>>& points, PhiSolver& solver,
                                           std::size_t threads = 1);

/// Regular grid over the unit cube (continuous) or the full table (discrete).
struct DensityGrid {
  std::size_t dims = 1;
  std::size_t resolution = 1;  // cells per dimension; 2 for binary tables
  bool discrete = false;
  std::vector<double> values;  // row-major, last dimension fastest

  std::size_t cell_count() const { return values.size(); }
  std::vector<std::size_t> cell_coords(std::size_t flat) const;
  double cell_lower(std::size_t cell_index_in_dim) const;
  double cell_upper(std::size_t cell_index_in_dim) const;
  std::vector<double> cell_center(std::size_t flat) const;
};

DensityGrid make_grid(std::size_t dims, std::size_t resolution, bool discrete);

/// Cell averages of a piecewise density.
DensityGrid density_grid(const PiecewiseDensity& density, std::size_t resolution);

/// Default grid resolution: 4096 cells in 1D, 256 per axis otherwise.
std::size_t default_grid_resolution(std::size_t dims);

/// Throws std::invalid_argument unless every region admits exactly one split.
void require_unique_split(const PartitionScheme& scheme);

}  // namespace optree

#endif  // OPTREE_ESTIMATOR_HPP
