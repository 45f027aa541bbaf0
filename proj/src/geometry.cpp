#include "optree/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <boost/container_hash/hash.hpp>

namespace optree {

namespace {

std::uint32_t code_depth(std::uint64_t code) { return static_cast<std::uint32_t>(std::bit_width(code) - 1); }

std::uint64_t code_index(std::uint64_t code) { return code - (std::uint64_t{1} << code_depth(code)); }

}  // namespace

Region::Region(RegionKind kind, std::vector<std::uint64_t> code) : kind_(kind), code_(std::move(code)) {
  refresh_level();
}

void Region::refresh_level() {
  std::uint32_t level = 0;
  for (auto c : code_) {
    level += kind_ == RegionKind::Continuous ? code_depth(c) : (c != 0 ? 1u : 0u);
  }
  level_ = level;
}

Region Region::continuous_root(std::size_t dims) {
  if (dims == 0) throw std::invalid_argument("region must have at least one dimension");
  return Region(RegionKind::Continuous, std::vector<std::uint64_t>(dims, 1));
}

Region Region::discrete_root(std::size_t dims) {
  if (dims == 0) throw std::invalid_argument("region must have at least one dimension");
  return Region(RegionKind::Discrete, std::vector<std::uint64_t>(dims, 0));
}

Region Region::continuous(std::span<const std::pair<std::uint32_t, std::uint64_t>> intervals) {
  if (intervals.empty()) throw std::invalid_argument("region must have at least one dimension");
  std::vector<std::uint64_t> code;
  code.reserve(intervals.size());
  for (auto [depth, index] : intervals) {
    if (depth > kMaxDyadicDepth) throw std::invalid_argument("dyadic depth exceeds 52");
    if (index >= (std::uint64_t{1} << depth)) throw std::invalid_argument("dyadic index out of range");
    code.push_back((std::uint64_t{1} << depth) + index);
  }
  return Region(RegionKind::Continuous, std::move(code));
}

Region Region::discrete(std::span<const std::uint8_t> states) {
  if (states.empty()) throw std::invalid_argument("region must have at least one dimension");
  std::vector<std::uint64_t> code;
  code.reserve(states.size());
  for (auto s : states) {
    if (s > 2) throw std::invalid_argument("discrete state must be 0, 1 or 2");
    code.push_back(s);
  }
  return Region(RegionKind::Discrete, std::move(code));
}

std::uint32_t Region::depth(std::size_t d) const {
  if (kind_ != RegionKind::Continuous) throw std::logic_error("depth() on a discrete region");
  return code_depth(code_.at(d));
}

std::uint64_t Region::index(std::size_t d) const {
  if (kind_ != RegionKind::Continuous) throw std::logic_error("index() on a discrete region");
  return code_index(code_.at(d));
}

double Region::lower(std::size_t d) const {
  if (kind_ == RegionKind::Discrete) {
    auto s = state(d);
    return s == 0 ? 1.0 : static_cast<double>(s);
  }
  return std::ldexp(static_cast<double>(index(d)), -static_cast<int>(depth(d)));
}

double Region::upper(std::size_t d) const {
  if (kind_ == RegionKind::Discrete) {
    auto s = state(d);
    return s == 0 ? 2.0 : static_cast<double>(s);
  }
  return std::ldexp(static_cast<double>(index(d) + 1), -static_cast<int>(depth(d)));
}

std::uint8_t Region::state(std::size_t d) const {
  if (kind_ != RegionKind::Discrete) throw std::logic_error("state() on a continuous region");
  return static_cast<std::uint8_t>(code_.at(d));
}

std::size_t Region::unset_count() const {
  if (kind_ != RegionKind::Discrete) throw std::logic_error("unset_count() on a continuous region");
  return static_cast<std::size_t>(std::count(code_.begin(), code_.end(), 0));
}

bool Region::contains(std::span<const double> x) const {
  if (x.size() != dims()) return false;
  for (std::size_t d = 0; d < dims(); ++d) {
    if (kind_ == RegionKind::Discrete) {
      auto s = state(d);
      if (x[d] != 1.0 && x[d] != 2.0) return false;
      if (s != 0 && x[d] != static_cast<double>(s)) return false;
    } else {
      const double lo = lower(d);
      const double hi = upper(d);
      if (!(x[d] >= lo)) return false;
      if (hi == 1.0 ? !(x[d] <= 1.0) : !(x[d] < hi)) return false;
    }
  }
  return true;
}

double Region::diameter() const {
  if (kind_ != RegionKind::Continuous) throw std::logic_error("diameter() on a discrete region");
  double sq = 0.0;
  for (std::size_t d = 0; d < dims(); ++d) {
    const double w = std::ldexp(1.0, -static_cast<int>(depth(d)));
    sq += w * w;
  }
  return std::sqrt(sq);
}

std::string Region::to_string() const {
  std::ostringstream os;
  for (std::size_t d = 0; d < dims(); ++d) {
    if (d > 0) os << " x ";
    if (kind_ == RegionKind::Discrete) {
      auto s = state(d);
      os << (s == 0 ? std::string("*") : std::to_string(s));
    } else {
      os << '[' << lower(d) << ", " << upper(d) << (upper(d) == 1.0 ? ']' : ')');
    }
  }
  return os.str();
}

Region PartitionScheme::root() const {
  return kind == SchemeKind::BinaryTable ? Region::discrete_root(dims) : Region::continuous_root(dims);
}

std::string to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::FullDyadic: return "full";
    case SchemeKind::Cycling: return "cycling";
    case SchemeKind::BinaryTable: return "table";
  }
  return "unknown";
}

void check_scheme_region(const PartitionScheme& scheme, const Region& region) {
  if (region.dims() != scheme.dims) {
    throw std::invalid_argument("region has " + std::to_string(region.dims()) + " dimensions, scheme has " +
                                std::to_string(scheme.dims));
  }
  if (region.kind() != scheme.region_kind()) throw std::invalid_argument("region kind does not match scheme");
}

std::size_t num_splits(const PartitionScheme& scheme, const Region& region) {
  check_scheme_region(scheme, region);
  switch (scheme.kind) {
    case SchemeKind::FullDyadic: return scheme.dims;
    case SchemeKind::Cycling: return 1;
    case SchemeKind::BinaryTable: return region.unset_count();
  }
  return 0;
}

std::size_t split_dimension(const PartitionScheme& scheme, const Region& region, std::size_t j) {
  const std::size_t m = num_splits(scheme, region);
  if (j >= m) {
    throw std::out_of_range("split index " + std::to_string(j) + " out of range (M = " + std::to_string(m) + ")");
  }
  switch (scheme.kind) {
    case SchemeKind::FullDyadic: return j;
    case SchemeKind::Cycling: return region.level() % scheme.dims;
    case SchemeKind::BinaryTable: {
      std::size_t seen = 0;
      for (std::size_t d = 0; d < region.dims(); ++d) {
        if (region.state(d) == 0 && seen++ == j) return d;
      }
      break;
    }
  }
  throw std::logic_error("unreachable split dimension");
}

Children split(const PartitionScheme& scheme, const Region& region, std::size_t j) {
  const std::size_t d = split_dimension(scheme, region, j);
  auto left = region.code_;
  auto right = region.code_;
  if (region.kind() == RegionKind::Continuous) {
    if (code_depth(region.code_[d]) >= kMaxDyadicDepth) {
      throw std::out_of_range("split would exceed the maximum dyadic depth");
    }
    left[d] = region.code_[d] << 1;
    right[d] = (region.code_[d] << 1) | 1u;
  } else {
    left[d] = 1;
    right[d] = 2;
  }
  return {Region(region.kind(), std::move(left)), Region(region.kind(), std::move(right))};
}

double measure(const Region& region) {
  if (region.kind() == RegionKind::Continuous) return std::ldexp(1.0, -static_cast<int>(region.level()));
  return std::ldexp(1.0, static_cast<int>(region.unset_count()));
}

double log_measure(const Region& region) {
  if (region.kind() == RegionKind::Continuous) return -static_cast<double>(region.level()) * std::numbers::ln2;
  return static_cast<double>(region.unset_count()) * std::numbers::ln2;
}

std::size_t locate(const PartitionScheme& scheme, const Region& region, std::size_t j, std::span<const double> x) {
  if (!region.contains(x)) throw std::invalid_argument("point lies outside region " + region.to_string());
  const std::size_t d = split_dimension(scheme, region, j);
  if (region.kind() == RegionKind::Discrete) return x[d] == 1.0 ? 0 : 1;
  const std::uint32_t depth = region.depth(d);
  const double mid = std::ldexp(static_cast<double>(2 * region.index(d) + 1), -static_cast<int>(depth + 1));
  return x[d] < mid ? 0 : 1;
}

bool RegionKey::operator<(const RegionKey& other) const {
  if (kind != other.kind) return kind < other.kind;
  return words < other.words;
}

std::size_t RegionKey::hash() const {
  std::size_t seed = static_cast<std::size_t>(kind);
  boost::hash_range(seed, words.begin(), words.end());
  return seed;
}

std::string RegionKey::to_string() const {
  std::string out = kind == RegionKind::Continuous ? "c" : "d";
  for (auto w : words) {
    out += ':';
    out += std::to_string(w);
  }
  return out;
}

RegionKey canonical_key(const Region& region) { return RegionKey{region.kind(), region.code()}; }

Region region_from_key(const RegionKey& key) {
  if (key.kind == RegionKind::Discrete) {
    std::vector<std::uint8_t> states;
    for (auto w : key.words) {
      if (w > 2) throw std::invalid_argument("bad discrete key word");
      states.push_back(static_cast<std::uint8_t>(w));
    }
    return Region::discrete(states);
  }
  std::vector<std::pair<std::uint32_t, std::uint64_t>> intervals;
  for (auto w : key.words) {
    if (w == 0) throw std::invalid_argument("bad dyadic key word");
    const auto depth = static_cast<std::uint32_t>(std::bit_width(w) - 1);
    intervals.emplace_back(depth, w - (std::uint64_t{1} << depth));
  }
  return Region::continuous(intervals);
}

}  // namespace optree
