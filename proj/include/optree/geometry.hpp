#ifndef OPTREE_GEOMETRY_HPP
#define OPTREE_GEOMETRY_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace optree {

enum class RegionKind : std::uint8_t { Continuous, Discrete };

struct Children;
struct PartitionScheme;

/// An elementary region of a recursive binary partition.
///
/// Continuous regions live in [0,1]^p and are stored as one dyadic "heap code"
/// per dimension: code = 2^depth + index, so the interval for dimension d is
/// [index * 2^-depth, (index + 1) * 2^-depth), closed on the right only when it
/// abuts 1. Discrete regions are slices of the binary table {1,2}^p and store
/// one state per dimension: 0 (unset), 1 or 2.
///
/// The representation is the set itself, not the path that produced it, so two
/// split orders that reach the same rectangle compare equal.
class Region {
 public:
  Region() = default;

  static Region continuous_root(std::size_t dims);
  static Region discrete_root(std::size_t dims);

  /// Builds a continuous region from explicit (depth, index) pairs.
  static Region continuous(std::span<const std::pair<std::uint32_t, std::uint64_t>> intervals);
  /// Builds a discrete region; each state is 0 (unset), 1 or 2.
  static Region discrete(std::span<const std::uint8_t> states);

  RegionKind kind() const { return kind_; }
  std::size_t dims() const { return code_.size(); }
  std::uint32_t level() const { return level_; }

  // Continuous accessors.
  std::uint32_t depth(std::size_t d) const;
  std::uint64_t index(std::size_t d) const;
  double lower(std::size_t d) const;
  double upper(std::size_t d) const;

  // Discrete accessor: 0 = unset.
  std::uint8_t state(std::size_t d) const;
  std::size_t unset_count() const;

  bool contains(std::span<const double> x) const;

  /// Euclidean diameter (continuous only).
  double diameter() const;

  const std::vector<std::uint64_t>& code() const { return code_; }

  bool operator==(const Region& other) const = default;

  std::string to_string() const;

 private:
  Region(RegionKind kind, std::vector<std::uint64_t> code);
  void refresh_level();

  RegionKind kind_ = RegionKind::Continuous;
  std::vector<std::uint64_t> code_;
  std::uint32_t level_ = 0;

  friend Children split(const PartitionScheme& scheme, const Region& region, std::size_t j);
};

enum class SchemeKind : std::uint8_t { FullDyadic, Cycling, BinaryTable };

struct PartitionScheme {
  SchemeKind kind = SchemeKind::FullDyadic;
  std::size_t dims = 1;

  static PartitionScheme full_dyadic(std::size_t p) { return {SchemeKind::FullDyadic, p}; }
  static PartitionScheme cycling(std::size_t p) { return {SchemeKind::Cycling, p}; }
  static PartitionScheme binary_table(std::size_t p) { return {SchemeKind::BinaryTable, p}; }

  RegionKind region_kind() const {
    return kind == SchemeKind::BinaryTable ? RegionKind::Discrete : RegionKind::Continuous;
  }
  Region root() const;

  bool operator==(const PartitionScheme&) const = default;
};

std::string to_string(SchemeKind kind);

/// Hard cap on the dyadic depth of one continuous dimension; midpoints stay
/// exactly representable in a double up to this depth.
inline constexpr std::uint32_t kMaxDyadicDepth = 52;

/// Number of ways M(A) to split the region under the scheme.
std::size_t num_splits(const PartitionScheme& scheme, const Region& region);

/// Coordinate that the j-th split (0-based) bisects.
std::size_t split_dimension(const PartitionScheme& scheme, const Region& region, std::size_t j);

struct Children {
  Region left;
  Region right;
};

/// Applies the j-th split (0-based). Continuous splits bisect at the midpoint;
/// discrete splits fix the chosen coordinate to 1 (left) or 2 (right).
Children split(const PartitionScheme& scheme, const Region& region, std::size_t j);

/// mu(A): Lebesgue measure for continuous regions, counting measure for
/// discrete ones. Always an exact power of two.
double measure(const Region& region);

/// log mu(A), computed from the exponent rather than from measure().
double log_measure(const Region& region);

/// 0 if x falls in the left child of split j, 1 if it falls in the right.
std::size_t locate(const PartitionScheme& scheme, const Region& region, std::size_t j,
                   std::span<const double> x);

/// Hashable identity of a region; equal rectangles give equal keys.
struct RegionKey {
  RegionKind kind = RegionKind::Continuous;
  std::vector<std::uint64_t> words;

  bool operator==(const RegionKey&) const = default;
  bool operator<(const RegionKey& other) const;
  std::size_t hash() const;
  std::string to_string() const;
};

RegionKey canonical_key(const Region& region);
/// Inverse of canonical_key; throws std::invalid_argument on malformed words.
Region region_from_key(const RegionKey& key);

void check_scheme_region(const PartitionScheme& scheme, const Region& region);

}  // namespace optree

template <>
struct std::hash<optree::RegionKey> {
  std::size_t operator()(const optree::RegionKey& key) const noexcept { return key.hash(); }
};

#endif  // OPTREE_GEOMETRY_HPP
