#ifndef OPTREE_EVALSUITE_HPP
#define OPTREE_EVALSUITE_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "optree/estimator.hpp"
#include "optree/marginal.hpp"
#include "optree/prior.hpp"

namespace optree {

enum class GeneratorKind { SpikyUniforms, BetaMixture, UniformSemiBeta2D, BivariateNormal2D, Custom };

std::string to_string(GeneratorKind kind);
/// Accepts the enum spelling or its kebab-case form ("spiky-uniforms").
GeneratorKind parse_generator(const std::string& name);

/// Mixture component uniform on an axis-aligned box.
struct UniformBox {
  double weight = 1.0;
  std::vector<double> lower;
  std::vector<double> upper;
};

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::SpikyUniforms;
  std::vector<UniformBox> boxes;  // Custom only
  std::uint64_t seed = 0;

  static GeneratorSpec named(GeneratorKind kind, std::uint64_t seed = 0);
  static GeneratorSpec custom(std::vector<UniformBox> boxes, std::uint64_t seed = 0);

  std::size_t dims() const;
  /// Throws ConfigError on unusable Custom boxes.
  void validate() const;
};

inline constexpr double kNormalMean[2] = {0.6, 0.4};
inline constexpr double kNormalSd = 0.1;

struct Dataset {
  std::size_t dims = 1;
  std::vector<double> coords;  // row-major
  std::uint64_t rejections = 0;

  std::size_t size() const { return coords.size() / dims; }
  std::span<const double> point(std::size_t i) const { return {coords.data() + i * dims, dims}; }
};

/// n i.i.d. points; point i draws from its own stream of the spec's seed.
Dataset generate(const GeneratorSpec& spec, std::size_t n, std::size_t threads = 1);

double true_density(const GeneratorSpec& spec, std::span<const double> x);

/// Probability mass of the unit square under the untruncated normal, by
/// nested adaptive quadrature.
double normal_square_mass();

struct L1Result {
  double value = 0.0;
  double std_error = 0.0;  // zero when exact
  bool exact = true;
};

inline constexpr std::size_t kL1MonteCarloPoints = 1'000'000;

/// Integral of |f - truth| over the unit cube: exact in 1D, Monte Carlo on
/// fixed-seed points otherwise.
L1Result l1_distance(const PiecewiseDensity& f, const GeneratorSpec& spec,
                     std::size_t mc_points = kL1MonteCarloPoints);

using Rational = boost::multiprecision::cpp_rational;

struct OracleValue {
  Rational phi;
  double log_phi = 0.0;
  std::size_t trees = 0;  // partitions enumerated
};

/// Phi of the full binary table by enumerating every tree and summing prior
/// weight times marginal likelihood in exact rational arithmetic. Needs
/// Beta(1/2,1/2) weights and p <= 3, n <= 5.
OracleValue brute_force_phi(std::size_t dims, const DataIndex& data, double rho);

struct OracleReport {
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  std::size_t worst_trial = 0;
  std::vector<double> rel_errors;
};

inline constexpr double kOracleTolerance = 1e-10;

/// Random binary-table datasets compared against compute_log_phi.
OracleReport oracle_check(std::size_t dims, std::size_t n, std::size_t trials, std::uint64_t seed,
                          double rho = 0.5);

struct PhiAuditReport {
  std::size_t checked = 0;
  double max_abs_error = 0.0;
  std::vector<std::string> failures;
};

/// Recomputes every recursed entry from its children's entries.
PhiAuditReport audit_phi_table(const PhiTable& table, const PriorSpec& spec, double tol = 1e-12);

}  // namespace optree

#endif  // OPTREE_EVALSUITE_HPP
