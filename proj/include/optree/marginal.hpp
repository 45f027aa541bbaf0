#ifndef OPTREE_MARGINAL_HPP
#define OPTREE_MARGINAL_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "optree/geometry.hpp"
#include "optree/prior.hpp"

namespace optree {

/// Observations stored row-major, one row per point.
class DataIndex {
 public:
  DataIndex() = default;
  /// Validates every row against the domain of `kind`: [0,1]^p for
  /// continuous data, {1,2}^p for binary tables. Throws DataError.
  DataIndex(std::size_t dims, std::vector<double> coords, RegionKind kind);

  static DataIndex from_rows(const std::vector<std::vector<double>>& rows, std::size_t dims, RegionKind kind);

  std::size_t size() const { return dims_ == 0 ? 0 : coords_.size() / dims_; }
  std::size_t dims() const { return dims_; }
  RegionKind kind() const { return kind_; }
  std::span<const double> point(std::size_t i) const { return {coords_.data() + i * dims_, dims_}; }
  const std::vector<double>& coords() const { return coords_; }

  std::vector<std::uint32_t> all_indices() const;

 private:
  std::size_t dims_ = 0;
  std::vector<double> coords_;
  RegionKind kind_ = RegionKind::Continuous;
};

/// How a table entry was resolved.
enum class TerminalKind : std::uint8_t {
  Recursed,           // full recursion over all splits
  Empty,              // n(A) = 0, Phi = 1
  SingleCell,         // discrete region with nothing left to split, Phi = 1
  SingleObservation,  // closed form for one point under the self-similar prior
  PrecisionStop,      // forced uniform leaf: too small or at the level cap
};

std::string to_string(TerminalKind kind);

struct PhiEntry {
  std::uint64_t count = 0;
  double log_phi = 0.0;
  double log_phi0 = 0.0;
  double post_rho = 0.0;
  std::vector<double> post_lambda;
  std::vector<BetaPair> post_alpha;
  TerminalKind terminal = TerminalKind::Recursed;
};

struct PosteriorParams {
  double post_rho = 0.0;
  std::vector<double> post_lambda;
  std::vector<BetaPair> post_alpha;
};

/// Memo table keyed by region identity. Safe for concurrent use: entries are
/// never erased or modified after insertion, so returned references stay valid
/// for the lifetime of the table.
class PhiTable {
 public:
  PhiTable() = default;
  PhiTable(const PhiTable&) = delete;
  PhiTable& operator=(const PhiTable&) = delete;

  const PhiEntry* find(const RegionKey& key) const;
  /// Inserts unless present; either way returns the stored entry.
  const PhiEntry& insert_if_absent(const RegionKey& key, PhiEntry entry);

  std::size_t size() const;
  /// Snapshot ordered by key, for deterministic export.
  std::vector<std::pair<RegionKey, const PhiEntry*>> sorted_entries() const;

 private:
  static constexpr std::size_t kShards = 32;
  struct Shard {
    mutable std::mutex mutex;
    std::unordered_map<RegionKey, PhiEntry> map;
  };
  Shard& shard_for(const RegionKey& key) const;

  mutable std::array<Shard, kShards> shards_;
};

struct RecursionLimits {
  double precision_threshold = 1e-6;
  std::uint32_t max_level = 48;
  /// Use the closed forms for single-observation regions when the prior is
  /// self-similar. Disabling forces explicit recursion down to the limits.
  bool closed_form_terminals = true;

  static RecursionLimits defaults(std::size_t dims);
  void validate() const;
};

/// log Phi0(A) = -n log mu(A); zero for empty regions.
double log_phi0(const Region& region, std::uint64_t n_count);

/// log D(n + alpha) - log D(alpha) for a binary split.
double log_dirichlet_ratio(std::pair<std::uint64_t, std::uint64_t> n, BetaPair alpha);

/// Numerically stable log(sum(exp(terms))). Throws NumericalFault when every
/// term is -inf or any term is NaN.
double log_sum_exp(std::span<const double> terms);

/// Evaluates the marginal-likelihood recursion with memoization.
///
/// The solver borrows the data, prior, limits and table; all must outlive it.
/// Each region's value is a pure function of the region, so concurrent workers
/// may race on the same entry without changing any result.
class PhiSolver {
 public:
  PhiSolver(const DataIndex& data, const PriorSpec& spec, const RecursionLimits& limits, PhiTable& table,
            std::size_t threads = 1);

  /// log Phi(A). Scans the data for the points in A when A is not cached.
  double compute_log_phi(const Region& region);

  /// Entry for a region whose points are already known.
  const PhiEntry& ensure(const Region& region, std::span<const std::uint32_t> indices);
  /// Entry for a region, scanning the data for its points if needed.
  const PhiEntry& ensure(const Region& region);

  /// Throws std::out_of_range when the region has not been computed.
  PosteriorParams posterior_params(const Region& region) const;
  const PhiEntry& entry(const Region& region) const;

  /// log Phi(Omega | data plus x). Regions that do not contain x are served
  /// from the shared table; the branch containing x is recomputed in a scratch
  /// table that is discarded afterwards.
  double log_phi_with_extra_point(std::span<const double> x);

  std::vector<std::uint32_t> indices_in(const Region& region) const;

  /// Splits `indices` between the two children of split j.
  void partition(const Region& region, std::size_t j, std::span<const std::uint32_t> indices,
                 std::vector<std::uint32_t>& left, std::vector<std::uint32_t>& right) const;

  const DataIndex& data() const { return data_; }
  const PriorSpec& spec() const { return spec_; }
  const RecursionLimits& limits() const { return limits_; }
  PhiTable& table() { return table_; }
  const PhiTable& table() const { return table_; }

 private:
  struct Extra {
    std::span<const double> x;
    PhiTable* table;
  };

  const PhiEntry& build(const Region& region, std::vector<std::uint32_t> indices, const Extra* extra);
  bool is_forced_stop(const Region& region) const;

  const DataIndex& data_;
  PriorSpec spec_;
  RecursionLimits limits_;
  PhiTable& table_;
  std::size_t threads_;
  std::uint32_t parallel_levels_;
};

/// Free-function form: log Phi(region) for the given data, prior and limits,
/// recording every visited region in `table`.
double compute_log_phi(const Region& region, const DataIndex& data, const PriorSpec& spec,
                       const RecursionLimits& limits, PhiTable& table);

PosteriorParams posterior_params(const Region& region, const PhiTable& table);

}  // namespace optree

#endif  // OPTREE_MARGINAL_HPP
