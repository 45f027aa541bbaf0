#include "optree/marginal.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "optree/errors.hpp"

namespace optree {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRhoRoundingSlack = 1e-12;

struct SplitRule {
  std::size_t dim;
  double mid;  // continuous only
  bool discrete;

  std::size_t side(std::span<const double> x) const {
    if (discrete) return x[dim] == 1.0 ? 0 : 1;
    return x[dim] < mid ? 0 : 1;
  }
};

SplitRule split_rule(const PartitionScheme& scheme, const Region& region, std::size_t j) {
  const std::size_t d = split_dimension(scheme, region, j);
  if (region.kind() == RegionKind::Discrete) return {d, 0.0, true};
  const double mid =
      std::ldexp(static_cast<double>(2 * region.index(d) + 1), -static_cast<int>(region.depth(d) + 1));
  return {d, mid, false};
}

double posterior_stop(double rho, double log_phi0_value, double log_phi) {
  if (rho == 0.0) return 0.0;
  const double v = rho * std::exp(log_phi0_value - log_phi);
  if (!(v >= 0.0 && v <= 1.0 + kRhoRoundingSlack)) {
    throw NumericalFault("posterior stopping probability " + std::to_string(v) + " outside [0,1]");
  }
  return std::min(v, 1.0);
}

std::vector<double> normalize_log_weights(std::span<const double> terms) {
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) throw NumericalFault("all split scores are -inf or non-finite");
  std::vector<double> w(terms.size());
  double total = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    w[j] = std::exp(terms[j] - m);
    total += w[j];
  }
  for (auto& v : w) v /= total;
  return w;
}

void require_finite(double v, const char* what, const Region& region) {
  if (!std::isfinite(v)) {
    throw NumericalFault(std::string("non-finite ") + what + " at region " + region.to_string());
  }
}

}  // namespace

// --- DataIndex ---------------------------------------------------------------

DataIndex::DataIndex(std::size_t dims, std::vector<double> coords, RegionKind kind)
    : dims_(dims), coords_(std::move(coords)), kind_(kind) {
  if (dims_ == 0) throw DataError("data must have at least one dimension");
  if (coords_.size() % dims_ != 0) throw DataError("coordinate count is not a multiple of the dimension");
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t d = 0; d < dims_; ++d) {
      const double v = coords_[i * dims_ + d];
      const bool ok = kind_ == RegionKind::Discrete ? (v == 1.0 || v == 2.0) : (v >= 0.0 && v <= 1.0);
      if (!ok) {
        throw DataError("row " + std::to_string(i + 1) + ", column " + std::to_string(d + 1) + ": value " +
                        std::to_string(v) +
                        (kind_ == RegionKind::Discrete ? " is not 1 or 2" : " lies outside [0,1]"));
      }
    }
  }
}

DataIndex DataIndex::from_rows(const std::vector<std::vector<double>>& rows, std::size_t dims, RegionKind kind) {
  std::vector<double> coords;
  coords.reserve(rows.size() * dims);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != dims) {
      throw DataError("row " + std::to_string(i + 1) + " has " + std::to_string(rows[i].size()) +
                      " columns, expected " + std::to_string(dims));
    }
    coords.insert(coords.end(), rows[i].begin(), rows[i].end());
  }
  return DataIndex(dims, std::move(coords), kind);
}

std::vector<std::uint32_t> DataIndex::all_indices() const {
  std::vector<std::uint32_t> idx(size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
  return idx;
}

std::string to_string(TerminalKind kind) {
  switch (kind) {
    case TerminalKind::Recursed: return "recursed";
    case TerminalKind::Empty: return "empty";
    case TerminalKind::SingleCell: return "single_cell";
    case TerminalKind::SingleObservation: return "single_observation";
    case TerminalKind::PrecisionStop: return "precision_stop";
  }
  return "unknown";
}

// --- PhiTable ----------------------------------------------------------------

PhiTable::Shard& PhiTable::shard_for(const RegionKey& key) const { return shards_[key.hash() % kShards]; }

const PhiEntry* PhiTable::find(const RegionKey& key) const {
  auto& shard = shard_for(key);
  std::lock_guard lock(shard.mutex);
  auto it = shard.map.find(key);
  return it == shard.map.end() ? nullptr : &it->second;
}

const PhiEntry& PhiTable::insert_if_absent(const RegionKey& key, PhiEntry entry) {
  auto& shard = shard_for(key);
  std::lock_guard lock(shard.mutex);
  return shard.map.try_emplace(key, std::move(entry)).first->second;
}

std::size_t PhiTable::size() const {
  std::size_t total = 0;
  for (auto& shard : shards_) {
    std::lock_guard lock(shard.mutex);
    total += shard.map.size();
  }
  return total;
}

std::vector<std::pair<RegionKey, const PhiEntry*>> PhiTable::sorted_entries() const {
  std::vector<std::pair<RegionKey, const PhiEntry*>> out;
  for (auto& shard : shards_) {
    std::lock_guard lock(shard.mutex);
    for (auto& [key, entry] : shard.map) out.emplace_back(key, &entry);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

// --- limits and scalar pieces ------------------------------------------------

RecursionLimits RecursionLimits::defaults(std::size_t dims) {
  RecursionLimits limits;
  limits.precision_threshold = dims <= 1 ? 1e-6 : 1e-4;
  return limits;
}

void RecursionLimits::validate() const {
  if (!(precision_threshold > 0.0)) throw ConfigError("precision threshold must be positive");
  if (max_level < 1 || max_level > kMaxDyadicDepth) {
    throw ConfigError("max level must lie in [1, " + std::to_string(kMaxDyadicDepth) + "]");
  }
}

double log_phi0(const Region& region, std::uint64_t n_count) {
  if (n_count == 0) return 0.0;
  return -static_cast<double>(n_count) * log_measure(region);
}

double log_dirichlet_ratio(std::pair<std::uint64_t, std::uint64_t> n, BetaPair alpha) {
  if (n.first == 0 && n.second == 0) return 0.0;
  using boost::math::lgamma;
  const double a1 = alpha.left;
  const double a2 = alpha.right;
  const double n1 = static_cast<double>(n.first);
  const double n2 = static_cast<double>(n.second);
  const double posterior = lgamma(n1 + a1) + lgamma(n2 + a2) - lgamma(n1 + n2 + a1 + a2);
  const double prior = lgamma(a1) + lgamma(a2) - lgamma(a1 + a2);
  return posterior - prior;
}

double log_sum_exp(std::span<const double> terms) {
  double m = kNegInf;
  for (double t : terms) {
    if (std::isnan(t)) throw NumericalFault("NaN term in log-sum-exp");
    m = std::max(m, t);
  }
  if (m == kNegInf) throw NumericalFault("log-sum-exp of an all -inf sequence");
  if (std::isinf(m)) throw NumericalFault("+inf term in log-sum-exp");
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - m);
  return m + std::log(sum);
}

// --- PhiSolver ---------------------------------------------------------------

PhiSolver::PhiSolver(const DataIndex& data, const PriorSpec& spec, const RecursionLimits& limits, PhiTable& table,
                     std::size_t threads)
    : data_(data), spec_(spec), limits_(limits), table_(table), threads_(std::max<std::size_t>(threads, 1)) {
  spec_.validate();
  limits_.validate();
  if (data_.size() > 0) {
    if (data_.dims() != spec_.scheme.dims) {
      throw DataError("data has " + std::to_string(data_.dims()) + " columns, scheme expects " +
                      std::to_string(spec_.scheme.dims));
    }
    if (data_.kind() != spec_.scheme.region_kind()) throw DataError("data kind does not match the partition scheme");
  }
  parallel_levels_ = threads_ > 1 ? static_cast<std::uint32_t>(std::bit_width(threads_)) : 0;
}

bool PhiSolver::is_forced_stop(const Region& region) const {
  return measure(region) < limits_.precision_threshold || region.level() >= limits_.max_level;
}

std::vector<std::uint32_t> PhiSolver::indices_in(const Region& region) const {
  std::vector<std::uint32_t> idx;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (region.contains(data_.point(i))) idx.push_back(static_cast<std::uint32_t>(i));
  }
  return idx;
}

void PhiSolver::partition(const Region& region, std::size_t j, std::span<const std::uint32_t> indices,
                          std::vector<std::uint32_t>& left, std::vector<std::uint32_t>& right) const {
  const SplitRule rule = split_rule(spec_.scheme, region, j);
  left.clear();
  right.clear();
  for (auto i : indices) (rule.side(data_.point(i)) == 0 ? left : right).push_back(i);
}

double PhiSolver::compute_log_phi(const Region& region) { return ensure(region).log_phi; }

const PhiEntry& PhiSolver::ensure(const Region& region, std::span<const std::uint32_t> indices) {
  check_scheme_region(spec_.scheme, region);
  if (auto* hit = table_.find(canonical_key(region))) return *hit;
  return build(region, std::vector<std::uint32_t>(indices.begin(), indices.end()), nullptr);
}

const PhiEntry& PhiSolver::ensure(const Region& region) {
  check_scheme_region(spec_.scheme, region);
  if (auto* hit = table_.find(canonical_key(region))) return *hit;
  return build(region, indices_in(region), nullptr);
}

const PhiEntry& PhiSolver::entry(const Region& region) const {
  auto* hit = table_.find(canonical_key(region));
  if (hit == nullptr) throw std::out_of_range("region " + region.to_string() + " is not in the table");
  return *hit;
}

PosteriorParams PhiSolver::posterior_params(const Region& region) const {
  const auto& e = entry(region);
  return {e.post_rho, e.post_lambda, e.post_alpha};
}

double PhiSolver::log_phi_with_extra_point(std::span<const double> x) {
  const Region root = spec_.scheme.root();
  if (!root.contains(x)) throw std::invalid_argument("query point lies outside the domain");
  PhiTable scratch;
  const Extra extra{x, &scratch};
  return build(root, data_.all_indices(), &extra).log_phi;
}

const PhiEntry& PhiSolver::build(const Region& region, std::vector<std::uint32_t> indices, const Extra* extra) {
  if (extra != nullptr && !region.contains(extra->x)) extra = nullptr;
  PhiTable& table = extra != nullptr ? *extra->table : table_;
  const RegionKey key = canonical_key(region);
  if (auto* hit = table.find(key)) return *hit;

  const std::uint64_t n = indices.size() + (extra != nullptr ? 1 : 0);
  const std::size_t m = num_splits(spec_.scheme, region);
  const double rho = stopping_prob(spec_, region);
  const double log_not_stop = std::log1p(-rho);

  PhiEntry e;
  e.count = n;
  e.log_phi0 = log_phi0(region, n);

  if (n == 0) {
    e.terminal = TerminalKind::Empty;
    e.log_phi = 0.0;
    e.post_rho = rho;
    if (m > 0) {
      e.post_lambda = selection_probs(spec_, region);
      for (std::size_t j = 0; j < m; ++j) e.post_alpha.push_back(assignment_weights(spec_, region, j));
    }
    return table.insert_if_absent(key, std::move(e));
  }

  if (m == 0) {
    e.terminal = TerminalKind::SingleCell;
    e.log_phi = 0.0;
    e.post_rho = 1.0;
    return table.insert_if_absent(key, std::move(e));
  }

  if (n == 1 && limits_.closed_form_terminals && spec_.self_similar()) {
    // Phi(A) = 1/mu(A) for one point; in a binary table mu(A) = 2^M.
    e.terminal = TerminalKind::SingleObservation;
    e.log_phi = -log_measure(region);
    const std::span<const double> x = extra != nullptr ? extra->x : data_.point(indices.front());
    const auto prior_lambda = selection_probs(spec_, region);
    std::vector<double> terms(m);
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t side = split_rule(spec_.scheme, region, j).side(x);
      const auto kids = split(spec_.scheme, region, j);
      const BetaPair alpha = assignment_weights(spec_, region, j);
      const std::pair<std::uint64_t, std::uint64_t> counts = side == 0 ? std::pair{1ull, 0ull} : std::pair{0ull, 1ull};
      const double child_log_phi = -log_measure(side == 0 ? kids.left : kids.right);
      terms[j] = log_not_stop + std::log(prior_lambda[j]) + log_dirichlet_ratio(counts, alpha) + child_log_phi;
      e.post_alpha.push_back({alpha.left + static_cast<double>(counts.first),
                              alpha.right + static_cast<double>(counts.second)});
    }
    e.post_rho = posterior_stop(rho, e.log_phi0, e.log_phi);
    e.post_lambda = normalize_log_weights(terms);
    return table.insert_if_absent(key, std::move(e));
  }

  if (is_forced_stop(region)) {
    e.terminal = TerminalKind::PrecisionStop;
    e.log_phi = e.log_phi0;
    e.post_rho = 1.0;
    require_finite(e.log_phi, "log Phi0", region);
    return table.insert_if_absent(key, std::move(e));
  }

  std::vector<Children> kids;
  kids.reserve(m);
  std::vector<std::vector<std::uint32_t>> left(m), right(m);
  for (std::size_t j = 0; j < m; ++j) {
    kids.push_back(split(spec_.scheme, region, j));
    partition(region, j, indices, left[j], right[j]);
  }

  std::vector<const PhiEntry*> left_entry(m), right_entry(m);
  const bool parallel = extra == nullptr && region.level() < parallel_levels_;
  if (parallel) {
    std::vector<std::future<const PhiEntry*>> pending;
    for (std::size_t j = 0; j < m; ++j) {
      pending.push_back(std::async(std::launch::async, [this, &kids, &left, j] {
        return &build(kids[j].left, std::move(left[j]), nullptr);
      }));
      pending.push_back(std::async(std::launch::async, [this, &kids, &right, j] {
        return &build(kids[j].right, std::move(right[j]), nullptr);
      }));
    }
    for (std::size_t j = 0; j < m; ++j) {
      left_entry[j] = pending[2 * j].get();
      right_entry[j] = pending[2 * j + 1].get();
    }
  } else {
    for (std::size_t j = 0; j < m; ++j) {
      left_entry[j] = &build(kids[j].left, std::move(left[j]), extra);
      right_entry[j] = &build(kids[j].right, std::move(right[j]), extra);
    }
  }

  const auto prior_lambda = selection_probs(spec_, region);
  std::vector<double> split_terms(m);
  for (std::size_t j = 0; j < m; ++j) {
    const BetaPair alpha = assignment_weights(spec_, region, j);
    const auto counts = std::pair{left_entry[j]->count, right_entry[j]->count};
    split_terms[j] = log_not_stop + std::log(prior_lambda[j]) + log_dirichlet_ratio(counts, alpha) +
                     left_entry[j]->log_phi + right_entry[j]->log_phi;
    require_finite(split_terms[j], "split score", region);
    e.post_alpha.push_back({alpha.left + static_cast<double>(counts.first),
                            alpha.right + static_cast<double>(counts.second)});
  }

  std::vector<double> all_terms;
  all_terms.reserve(m + 1);
  all_terms.push_back(rho > 0.0 ? std::log(rho) + e.log_phi0 : kNegInf);
  all_terms.insert(all_terms.end(), split_terms.begin(), split_terms.end());
  e.terminal = TerminalKind::Recursed;
  e.log_phi = log_sum_exp(all_terms);
  require_finite(e.log_phi, "log Phi", region);
  e.post_rho = posterior_stop(rho, e.log_phi0, e.log_phi);
  e.post_lambda = normalize_log_weights(split_terms);
  return table.insert_if_absent(key, std::move(e));
}

double compute_log_phi(const Region& region, const DataIndex& data, const PriorSpec& spec,
                       const RecursionLimits& limits, PhiTable& table) {
  PhiSolver solver(data, spec, limits, table);
  return solver.compute_log_phi(region);
}

PosteriorParams posterior_params(const Region& region, const PhiTable& table) {
  auto* hit = table.find(canonical_key(region));
  if (hit == nullptr) throw std::out_of_range("region " + region.to_string() + " is not in the table");
  return {hit->post_rho, hit->post_lambda, hit->post_alpha};
}

}  // namespace optree
