#include "optree/prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "optree/errors.hpp"

namespace optree {

std::string to_string(AlphaRule rule) {
  switch (rule) {
    case AlphaRule::ConstantHalf: return "half";
    case AlphaRule::TauScaled: return "tau";
    case AlphaRule::QuadraticDepth: return "quadratic";
  }
  return "unknown";
}

PriorSpec PriorSpec::optional_tree(PartitionScheme scheme, double rho, AlphaRule rule, double tau) {
  PriorSpec spec{rho, rule, tau, scheme};
  spec.validate();
  return spec;
}

PriorSpec PriorSpec::standard_polya_tree(PartitionScheme scheme) {
  PriorSpec spec{0.0, AlphaRule::QuadraticDepth, 2.0, scheme};
  spec.validate();
  return spec;
}

bool PriorSpec::self_similar() const {
  if (alpha_rule == AlphaRule::QuadraticDepth) return false;
  return alpha_rule == AlphaRule::ConstantHalf || tau == 2.0;
}

void PriorSpec::validate() const {
  if (scheme.dims == 0) throw ConfigError("partition scheme needs at least one dimension");
  if (alpha_rule == AlphaRule::QuadraticDepth) {
    if (rho != 0.0) throw ConfigError("the standard Polya tree baseline requires rho = 0");
    return;
  }
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0,1)");
  if (alpha_rule == AlphaRule::TauScaled && !(tau > 0.0 && std::isfinite(tau))) {
    throw ConfigError("tau must be positive");
  }
}

double stopping_prob(const PriorSpec& spec, const Region& /*region*/) { return spec.rho; }

std::vector<double> selection_probs(const PriorSpec& spec, const Region& region) {
  const std::size_t m = num_splits(spec.scheme, region);
  if (m == 0) throw std::invalid_argument("region " + region.to_string() + " has no available split");
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

BetaPair assignment_weights(const PriorSpec& spec, const Region& region, std::size_t j) {
  switch (spec.alpha_rule) {
    case AlphaRule::ConstantHalf:
      split_dimension(spec.scheme, region, j);
      return {0.5, 0.5};
    case AlphaRule::TauScaled: {
      const auto kids = split(spec.scheme, region, j);
      const double root_measure = measure(spec.scheme.root());
      const double scale = std::pow(spec.tau, static_cast<double>(region.level()));
      return {scale * (measure(kids.left) / root_measure), scale * (measure(kids.right) / root_measure)};
    }
    case AlphaRule::QuadraticDepth: {
      split_dimension(spec.scheme, region, j);
      const double k = static_cast<double>(region.level() + 1);
      const double a = std::max(1.0, k * k);
      return {a, a};
    }
  }
  throw std::logic_error("unknown alpha rule");
}

}  // namespace optree
