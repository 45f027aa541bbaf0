#ifndef OPTREE_PRIOR_HPP
#define OPTREE_PRIOR_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "optree/geometry.hpp"

namespace optree {

enum class AlphaRule { ConstantHalf, TauScaled, QuadraticDepth };

std::string to_string(AlphaRule rule);

/// Beta pseudo-counts for the two children of a binary split.
struct BetaPair {
  double left = 0.5;
  double right = 0.5;

  double sum() const { return left + right; }
  bool operator==(const BetaPair&) const = default;
};

/// Parameters of an optional Polya tree prior: a constant stopping
/// probability, uniform selection over the available splits, and one of three
/// assignment-weight rules.
///
/// QuadraticDepth is the standard (never-stopping) Polya tree used as a
/// baseline; it always carries rho = 0.
struct PriorSpec {
  double rho = 0.5;
  AlphaRule alpha_rule = AlphaRule::ConstantHalf;
  double tau = 2.0;
  PartitionScheme scheme;

  static PriorSpec optional_tree(PartitionScheme scheme, double rho = 0.5,
                                 AlphaRule rule = AlphaRule::ConstantHalf, double tau = 2.0);
  static PriorSpec standard_polya_tree(PartitionScheme scheme);

  bool is_standard_polya_tree() const { return alpha_rule == AlphaRule::QuadraticDepth; }

  /// True when every split uses Beta(1/2, 1/2) with uniform selection and a
  /// constant rho in (0,1); the single-observation closed forms hold then.
  bool self_similar() const;

  /// Throws ConfigError on rho outside (0,1), tau <= 0 or an empty scheme.
  void validate() const;
};

double stopping_prob(const PriorSpec& spec, const Region& region);

std::vector<double> selection_probs(const PriorSpec& spec, const Region& region);

BetaPair assignment_weights(const PriorSpec& spec, const Region& region, std::size_t j);

}  // namespace optree

#endif  // OPTREE_PRIOR_HPP
