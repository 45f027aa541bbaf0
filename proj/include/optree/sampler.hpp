#ifndef OPTREE_SAMPLER_HPP
#define OPTREE_SAMPLER_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "optree/estimator.hpp"
#include "optree/geometry.hpp"
#include "optree/marginal.hpp"
#include "optree/prior.hpp"

namespace optree {

/// Stopping probability, selection probabilities and Beta weights for one region.
struct RegionParams {
  double rho = 0.0;
  std::vector<double> lambda;
  std::vector<BetaPair> alpha;
  bool empty = false;  // the region holds no data
};

class ParameterSource {
 public:
  virtual ~ParameterSource() = default;
  virtual const PartitionScheme& scheme() const = 0;
  /// `empty_hint` is set when an ancestor is known to hold no data.
  virtual RegionParams params(const Region& region, bool empty_hint) const = 0;
};

class PriorSource final : public ParameterSource {
 public:
  explicit PriorSource(PriorSpec spec);
  const PartitionScheme& scheme() const override { return spec_.scheme; }
  RegionParams params(const Region& region, bool empty_hint) const override;

 private:
  PriorSpec spec_;
};

/// Posterior parameters from a solver; regions missing from its table are
/// computed on demand.
class PosteriorSource final : public ParameterSource {
 public:
  explicit PosteriorSource(PhiSolver& solver) : solver_(solver) {}
  const PartitionScheme& scheme() const override { return solver_.spec().scheme; }
  RegionParams params(const Region& region, bool empty_hint) const override;

 private:
  PhiSolver& solver_;
};

struct DrawPiece {
  Region region;
  double mass = 0.0;
  bool stopped = true;  // false when cut off at the depth limit
};

struct RandomMeasureDraw {
  PartitionScheme scheme;
  std::vector<DrawPiece> pieces;
  /// live_mass[k]: mass of the level-k regions reached without stopping.
  std::vector<double> live_mass;
  std::uint32_t depth = 0;  // deepest level holding a piece
  std::uint64_t seed = 0;

  double total_mass() const;
  PiecewiseDensity density() const;
};

/// One draw of the random measure truncated at `max_depth` levels. Each
/// region draws from its own Philox stream keyed by (seed, region), so the
/// result does not depend on traversal order or `threads`.
RandomMeasureDraw sample_measure(const ParameterSource& source, const PartitionScheme& scheme,
                                 std::uint32_t max_depth, std::uint64_t seed, std::size_t threads = 1);

struct MassPoint {
  std::uint32_t k = 0;
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte Carlo mean of the unstopped prior mass at each depth in `depths`.
std::vector<MassPoint> unstopped_mass_curve(const PriorSpec& spec, const PartitionScheme& scheme,
                                            std::span<const std::uint32_t> depths, std::size_t n_draws,
                                            std::uint64_t seed, std::size_t threads = 1);

}  // namespace optree

#endif  // OPTREE_SAMPLER_HPP
