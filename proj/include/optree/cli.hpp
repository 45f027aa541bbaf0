#ifndef OPTREE_CLI_HPP
#define OPTREE_CLI_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "optree/marginal.hpp"
#include "optree/prior.hpp"
#include "optree/serialize.hpp"

namespace optree {

enum class EstimatorKind { Mean, Hmap, Hutter, StandardPt };

std::string to_string(EstimatorKind kind);
EstimatorKind parse_estimator(const std::string& name);
SchemeKind parse_scheme(const std::string& name);
AlphaRule parse_alpha_rule(const std::string& name);

struct RunConfig {
  std::string scheme = "full";
  std::size_t dims = 1;
  double rho = 0.5;
  std::string alpha_rule = "half";
  double tau = 2.0;
  std::string estimator = "mean";
  std::optional<double> precision_threshold;  // defaults by dimension
  std::uint32_t max_level = 48;
  std::uint64_t seed = 0;
  std::size_t grid_resolution = 0;  // 0: default for the dimension
  std::string input;
  std::string output_dir = ".";
  bool rescale = false;
  std::string truth;  // generator name for an L1 report, empty for none
  bool record_runtime = false;

  PartitionScheme partition_scheme() const;
  /// The prior actually used: the standard Polya tree for the baseline.
  PriorSpec prior() const;
  RecursionLimits limits() const;
  std::size_t resolution() const;
  /// Throws ConfigError on any invalid field. Touches no data.
  void validate() const;
  /// Canonical form used for the config hash.
  Json to_json() const;
};

struct CsvData {
  std::size_t dims = 1;
  std::vector<double> coords;
};

/// Headerless comma-separated rows of `dims` numbers. Throws DataError naming
/// the row and column of the first malformed cell.
CsvData read_csv(const std::filesystem::path& path, std::size_t dims);

struct Rescaling {
  bool applied = false;
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Maps each coordinate affinely from its observed [min, max] onto [0, 1].
Rescaling rescale_in_place(CsvData& data);

/// Entry point for the optree binary. Returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace optree

#endif  // OPTREE_CLI_HPP
