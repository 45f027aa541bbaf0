#include "optree/evalsuite.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>
#include <boost/random/beta_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "optree/errors.hpp"
#include "optree/random.hpp"

namespace optree {

namespace {

constexpr std::uint64_t kGeneratorSalt = 0x47454E4552415445ull;
constexpr std::uint64_t kL1Seed = 0x4C314D495354ull;

struct BetaComponent {
  double weight;
  double a;
  double b;
};

constexpr BetaComponent kBetaMixture[2] = {{0.7, 40.0, 60.0}, {0.3, 2000.0, 1000.0}};
constexpr double kSemiBetaA = 100.0;
constexpr double kSemiBetaB = 120.0;

std::vector<UniformBox> spiky_boxes() {
  return {{0.5, {0.23}, {0.232}}, {0.5, {0.233}, {0.235}}};
}

const UniformBox kSemiUniform{0.35, {0.78, 0.2}, {0.80, 0.8}};
const UniformBox kSemiStrip{0.65, {0.25, 0.0}, {0.4, 1.0}};

double box_volume(const UniformBox& box) {
  double v = 1.0;
  for (std::size_t d = 0; d < box.lower.size(); ++d) v *= box.upper[d] - box.lower[d];
  return v;
}

bool in_box(const UniformBox& box, std::span<const double> x) {
  for (std::size_t d = 0; d < x.size(); ++d) {
    const double hi = box.upper[d];
    if (x[d] < box.lower[d]) return false;
    if (hi == 1.0 ? x[d] > 1.0 : x[d] >= hi) return false;
  }
  return true;
}

double boxes_density(const std::vector<UniformBox>& boxes, std::span<const double> x) {
  double f = 0.0;
  for (const auto& box : boxes)
    if (in_box(box, x)) f += box.weight / box_volume(box);
  return f;
}

double beta_pdf(double a, double b, double x) { return boost::math::pdf(boost::math::beta_distribution<double>(a, b), x); }
double beta_cdf(double a, double b, double x) { return boost::math::cdf(boost::math::beta_distribution<double>(a, b), x); }

double mixture_pdf(double x) {
  double f = 0.0;
  for (const auto& c : kBetaMixture) f += c.weight * beta_pdf(c.a, c.b, x);
  return f;
}

double mixture_cdf(double x) {
  double f = 0.0;
  for (const auto& c : kBetaMixture) f += c.weight * beta_cdf(c.a, c.b, x);
  return f;
}

double mixture_slope(double x) {
  double s = 0.0;
  for (const auto& c : kBetaMixture) s += c.weight * beta_pdf(c.a, c.b, x) * ((c.a - 1.0) / x - (c.b - 1.0) / (1.0 - x));
  return s;
}

double normal_pdf(double x, double mean) {
  const double z = (x - mean) / kNormalSd;
  return std::exp(-0.5 * z * z) / (kNormalSd * std::sqrt(2.0 * std::numbers::pi));
}

double uniform_in(Philox4x32& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

void draw_box(Philox4x32& rng, const UniformBox& box, double* out) {
  for (std::size_t d = 0; d < box.lower.size(); ++d) out[d] = uniform_in(rng, box.lower[d], box.upper[d]);
}

const UniformBox& pick_box(const std::vector<UniformBox>& boxes, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < boxes.size(); ++i) {
    acc += boxes[i].weight;
    if (u < acc) return boxes[i];
  }
  return boxes.back();
}

// Returns the number of rejected proposals.
std::uint64_t draw_point(const GeneratorSpec& spec, Philox4x32& rng, double* out) {
  switch (spec.kind) {
    case GeneratorKind::SpikyUniforms: {
      static const auto boxes = spiky_boxes();
      const double u = uniform01(rng);
      draw_box(rng, pick_box(boxes, u), out);
      return 0;
    }
    case GeneratorKind::Custom: {
      const double u = uniform01(rng);
      draw_box(rng, pick_box(spec.boxes, u), out);
      return 0;
    }
    case GeneratorKind::BetaMixture: {
      const auto& c = uniform01(rng) < kBetaMixture[0].weight ? kBetaMixture[0] : kBetaMixture[1];
      out[0] = boost::random::beta_distribution<double>(c.a, c.b)(rng);
      return 0;
    }
    case GeneratorKind::UniformSemiBeta2D: {
      if (uniform01(rng) < kSemiUniform.weight) {
        draw_box(rng, kSemiUniform, out);
      } else {
        out[0] = uniform_in(rng, kSemiStrip.lower[0], kSemiStrip.upper[0]);
        out[1] = boost::random::beta_distribution<double>(kSemiBetaA, kSemiBetaB)(rng);
      }
      return 0;
    }
    case GeneratorKind::BivariateNormal2D: {
      std::uint64_t rejected = 0;
      boost::random::normal_distribution<double> nx(kNormalMean[0], kNormalSd), ny(kNormalMean[1], kNormalSd);
      for (;;) {
        out[0] = nx(rng);
        out[1] = ny(rng);
        if (out[0] >= 0.0 && out[0] <= 1.0 && out[1] >= 0.0 && out[1] <= 1.0) return rejected;
        ++rejected;
      }
    }
  }
  throw std::logic_error("unknown generator");
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::SpikyUniforms: return "SpikyUniforms";
    case GeneratorKind::BetaMixture: return "BetaMixture";
    case GeneratorKind::UniformSemiBeta2D: return "UniformSemiBeta2D";
    case GeneratorKind::BivariateNormal2D: return "BivariateNormal2D";
    case GeneratorKind::Custom: return "Custom";
  }
  return "?";
}

GeneratorKind parse_generator(const std::string& name) {
  static const std::map<std::string, GeneratorKind> names = {
      {"SpikyUniforms", GeneratorKind::SpikyUniforms},
      {"spiky-uniforms", GeneratorKind::SpikyUniforms},
      {"BetaMixture", GeneratorKind::BetaMixture},
      {"beta-mixture", GeneratorKind::BetaMixture},
      {"UniformSemiBeta2D", GeneratorKind::UniformSemiBeta2D},
      {"uniform-semi-beta-2d", GeneratorKind::UniformSemiBeta2D},
      {"BivariateNormal2D", GeneratorKind::BivariateNormal2D},
      {"bivariate-normal-2d", GeneratorKind::BivariateNormal2D},
      {"Custom", GeneratorKind::Custom},
      {"custom", GeneratorKind::Custom},
  };
  auto it = names.find(name);
  if (it == names.end()) throw ConfigError("unknown generator '" + name + "'");
  return it->second;
}

GeneratorSpec GeneratorSpec::named(GeneratorKind kind, std::uint64_t seed) {
  if (kind == GeneratorKind::Custom) throw ConfigError("Custom generators need boxes");
  return {kind, {}, seed};
}

GeneratorSpec GeneratorSpec::custom(std::vector<UniformBox> boxes, std::uint64_t seed) {
  GeneratorSpec spec{GeneratorKind::Custom, std::move(boxes), seed};
  spec.validate();
  return spec;
}

std::size_t GeneratorSpec::dims() const {
  switch (kind) {
    case GeneratorKind::SpikyUniforms:
    case GeneratorKind::BetaMixture: return 1;
    case GeneratorKind::UniformSemiBeta2D:
    case GeneratorKind::BivariateNormal2D: return 2;
    case GeneratorKind::Custom: return boxes.empty() ? 0 : boxes.front().lower.size();
  }
  return 0;
}

void GeneratorSpec::validate() const {
  if (kind != GeneratorKind::Custom) {
    if (!boxes.empty()) throw ConfigError(to_string(kind) + " takes no boxes");
    return;
  }
  if (boxes.empty()) throw ConfigError("Custom generator has no boxes");
  const std::size_t p = boxes.front().lower.size();
  if (p == 0) throw ConfigError("Custom boxes need at least one dimension");
  double total = 0.0;
  for (const auto& box : boxes) {
    if (box.lower.size() != p || box.upper.size() != p) throw ConfigError("Custom boxes differ in dimension");
    if (!(box.weight > 0.0) || !std::isfinite(box.weight)) throw ConfigError("Custom box weights must be positive");
    for (std::size_t d = 0; d < p; ++d)
      if (!(box.lower[d] >= 0.0 && box.lower[d] < box.upper[d] && box.upper[d] <= 1.0))
        throw ConfigError("Custom box bounds must satisfy 0 <= lower < upper <= 1");
    total += box.weight;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("Custom box weights must sum to 1");
}

Dataset generate(const GeneratorSpec& spec, std::size_t n, std::size_t threads) {
  spec.validate();
  if (n < 1) throw ConfigError("sample size must be at least 1");
  Dataset out;
  out.dims = spec.dims();
  out.coords.assign(n * out.dims, 0.0);
  std::vector<std::uint64_t> rejected(n, 0);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Philox4x32 rng(spec.seed, mix64(kGeneratorSalt ^ i));
      rejected[i] = draw_point(spec, rng, out.coords.data() + i * out.dims);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n / 1024 + 1));
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::future<void>> pending;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t begin = 0; begin < n; begin += chunk)
      pending.push_back(std::async(std::launch::async, run, begin, std::min(n, begin + chunk)));
    for (auto& f : pending) f.get();
  }
  for (auto r : rejected) out.rejections += r;
  return out;
}

double normal_square_mass() {
  static const double mass = [] {
    using boost::math::quadrature::gauss_kronrod;
    auto inner = [](double x) {
      return normal_pdf(x, kNormalMean[0]) *
             gauss_kronrod<double, 61>::integrate([](double y) { return normal_pdf(y, kNormalMean[1]); }, 0.0, 1.0,
                                                  15, 1e-14);
    };
    return gauss_kronrod<double, 61>::integrate(inner, 0.0, 1.0, 15, 1e-14);
  }();
  return mass;
}

double true_density(const GeneratorSpec& spec, std::span<const double> x) {
  if (x.size() != spec.dims()) throw std::invalid_argument("point has the wrong dimension");
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("point lies outside the unit cube");
  switch (spec.kind) {
    case GeneratorKind::SpikyUniforms: {
      static const auto boxes = spiky_boxes();
      return boxes_density(boxes, x);
    }
    case GeneratorKind::Custom: return boxes_density(spec.boxes, x);
    case GeneratorKind::BetaMixture: return mixture_pdf(x[0]);
    case GeneratorKind::UniformSemiBeta2D: {
      double f = in_box(kSemiUniform, x) ? kSemiUniform.weight / box_volume(kSemiUniform) : 0.0;
      if (in_box(kSemiStrip, x))
        f += kSemiStrip.weight / (kSemiStrip.upper[0] - kSemiStrip.lower[0]) * beta_pdf(kSemiBetaA, kSemiBetaB, x[1]);
      return f;
    }
    case GeneratorKind::BivariateNormal2D:
      return normal_pdf(x[0], kNormalMean[0]) * normal_pdf(x[1], kNormalMean[1]) / normal_square_mass();
  }
  throw std::logic_error("unknown generator");
}

namespace {

// Truth on [0,1] as segments on which it is either constant or monotone.
struct Segment {
  double lo;
  double hi;
  bool constant;
  double value;
};

std::vector<Segment> step_segments(const std::vector<UniformBox>& boxes) {
  std::vector<double> cuts{0.0, 1.0};
  for (const auto& box : boxes) {
    cuts.push_back(box.lower[0]);
    cuts.push_back(box.upper[0]);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::vector<Segment> out;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
    out.push_back({cuts[i], cuts[i + 1], true, boxes_density(boxes, std::span<const double>(&mid, 1))});
  }
  return out;
}

double refine_root(const std::function<double(double)>& f, double lo, double hi) {
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t iters = 200;
  auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

const std::vector<Segment>& mixture_segments() {
  static const std::vector<Segment> segments = [] {
    constexpr std::size_t kScan = 1 << 16;
    std::vector<double> cuts{0.0};
    double prev_x = 0.5 / kScan;
    double prev = mixture_slope(prev_x);
    for (std::size_t i = 1; i < kScan; ++i) {
      const double x = (static_cast<double>(i) + 0.5) / kScan;
      const double s = mixture_slope(x);
      if ((prev > 0.0 && s < 0.0) || (prev < 0.0 && s > 0.0)) cuts.push_back(refine_root(mixture_slope, prev_x, x));
      if (s != 0.0) {
        prev = s;
        prev_x = x;
      }
    }
    cuts.push_back(1.0);
    std::vector<Segment> out;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) out.push_back({cuts[i], cuts[i + 1], false, 0.0});
    return out;
  }();
  return segments;
}

// Integral of |c - g| over [a,b] where g is monotone there.
double monotone_gap(double c, double a, double b) {
  auto gap = [c](double s, double t) { return std::abs(c * (t - s) - (mixture_cdf(t) - mixture_cdf(s))); };
  const double ga = mixture_pdf(a) - c;
  const double gb = mixture_pdf(b) - c;
  if ((ga < 0.0 && gb > 0.0) || (ga > 0.0 && gb < 0.0)) {
    const double r = refine_root([c](double x) { return mixture_pdf(x) - c; }, a, b);
    return gap(a, r) + gap(r, b);
  }
  return gap(a, b);
}

L1Result exact_l1_1d(const PiecewiseDensity& f, const GeneratorSpec& spec) {
  std::vector<Segment> segments;
  switch (spec.kind) {
    case GeneratorKind::SpikyUniforms: segments = step_segments(spiky_boxes()); break;
    case GeneratorKind::Custom: segments = step_segments(spec.boxes); break;
    case GeneratorKind::BetaMixture: segments = mixture_segments(); break;
    default: throw std::invalid_argument("no exact L1 route for " + to_string(spec.kind));
  }
  std::vector<const DensityPiece*> pieces;
  for (const auto& piece : f.pieces) pieces.push_back(&piece);
  std::sort(pieces.begin(), pieces.end(),
            [](const DensityPiece* a, const DensityPiece* b) { return a->region.lower(0) < b->region.lower(0); });

  double total = 0.0;
  std::size_t s = 0;
  for (const auto* piece : pieces) {
    const double lo = piece->region.lower(0);
    const double hi = piece->region.upper(0);
    while (s > 0 && segments[s].lo > lo) --s;
    while (s + 1 < segments.size() && segments[s].hi <= lo) ++s;
    for (std::size_t k = s; k < segments.size() && segments[k].lo < hi; ++k) {
      const double a = std::max(lo, segments[k].lo);
      const double b = std::min(hi, segments[k].hi);
      if (!(a < b)) continue;
      total += segments[k].constant ? std::abs(piece->density - segments[k].value) * (b - a)
                                    : monotone_gap(piece->density, a, b);
    }
  }
  return {total, 0.0, true};
}

L1Result monte_carlo_l1(const PiecewiseDensity& f, const GeneratorSpec& spec, std::size_t points) {
  if (points < 2) throw std::invalid_argument("Monte Carlo L1 needs at least two points");
  const DensityLocator locate(f);
  const std::size_t p = spec.dims();
  Philox4x32 rng(kL1Seed, 0);
  std::vector<double> x(p);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    for (auto& v : x) v = uniform01(rng);
    const double d = std::abs(locate(x) - true_density(spec, x));
    const double delta = d - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (d - mean);
  }
  const double var = m2 / static_cast<double>(points - 1);
  return {mean, std::sqrt(var / static_cast<double>(points)), false};
}

}  // namespace

L1Result l1_distance(const PiecewiseDensity& f, const GeneratorSpec& spec, std::size_t mc_points) {
  spec.validate();
  if (f.scheme.region_kind() != RegionKind::Continuous) throw std::invalid_argument("L1 needs a continuous density");
  if (f.scheme.dims != spec.dims()) throw std::invalid_argument("density and generator differ in dimension");
  if (spec.dims() == 1) return exact_l1_1d(f, spec);
  return monte_carlo_l1(f, spec, mc_points);
}

namespace {

struct BruteTree {
  int dim = -1;  // -1 for a leaf
  std::shared_ptr<const BruteTree> low, high;
};
using TreePtr = std::shared_ptr<const BruteTree>;

const std::vector<TreePtr>& trees_over(unsigned free_mask, std::map<unsigned, std::vector<TreePtr>>& memo) {
  if (auto it = memo.find(free_mask); it != memo.end()) return it->second;
  std::vector<TreePtr> out{std::make_shared<BruteTree>()};
  for (int d = 0; d < 3; ++d) {
    if (!(free_mask & (1u << d))) continue;
    const auto& sub = trees_over(free_mask & ~(1u << d), memo);
    for (const auto& lo : sub)
      for (const auto& hi : sub) out.push_back(std::make_shared<BruteTree>(BruteTree{d, lo, hi}));
  }
  return memo.emplace(free_mask, std::move(out)).first->second;
}

Rational factorial(unsigned n) {
  Rational r = 1;
  for (unsigned k = 2; k <= n; ++k) r *= k;
  return r;
}

// Gamma(m + 1/2) / sqrt(pi) = (2m)! / (4^m m!)
Rational half_gamma(unsigned m) {
  Rational four_m = 1;
  for (unsigned k = 0; k < m; ++k) four_m *= 4;
  return factorial(2 * m) / (four_m * factorial(m));
}

// D(n + 1/2) / D(1/2) for a binary split.
Rational beta_ratio(unsigned n1, unsigned n2) { return half_gamma(n1) * half_gamma(n2) / factorial(n1 + n2); }

Rational exact_rational(double v) {
  int e = 0;
  const double mant = std::frexp(v, &e);
  const auto scaled = static_cast<std::int64_t>(std::ldexp(mant, 53));
  Rational r = scaled;
  const int shift = e - 53;
  boost::multiprecision::cpp_int pow2 = 1;
  pow2 <<= std::abs(shift);
  return shift >= 0 ? r * Rational(pow2) : r / Rational(pow2);
}

using Cell = std::array<int, 3>;

Rational tree_weight(const BruteTree& tree, unsigned free_mask, const std::vector<Cell>& points, const Rational& rho) {
  const unsigned m = static_cast<unsigned>(std::popcount(free_mask));
  if (tree.dim < 0) {
    if (m == 0) return 1;
    Rational cells = 1;
    for (unsigned k = 0; k < m; ++k) cells *= 2;
    Rational lik = 1;
    for (std::size_t i = 0; i < points.size(); ++i) lik /= cells;
    return rho * lik;
  }
  std::vector<Cell> low, high;
  for (const auto& c : points) (c[tree.dim] == 1 ? low : high).push_back(c);
  const unsigned child_mask = free_mask & ~(1u << tree.dim);
  return (1 - rho) / m * beta_ratio(static_cast<unsigned>(low.size()), static_cast<unsigned>(high.size())) *
         tree_weight(*tree.low, child_mask, low, rho) * tree_weight(*tree.high, child_mask, high, rho);
}

}  // namespace

OracleValue brute_force_phi(std::size_t dims, const DataIndex& data, double rho) {
  if (dims < 1 || dims > 3) throw ConfigError("brute-force oracle supports 1 to 3 dimensions");
  if (data.size() > 5) throw ConfigError("brute-force oracle supports at most 5 observations");
  if (data.kind() != RegionKind::Discrete || (data.size() > 0 && data.dims() != dims))
    throw ConfigError("brute-force oracle needs binary-table data of matching dimension");
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError("rho must lie in (0,1)");

  std::vector<Cell> points;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Cell c{1, 1, 1};
    for (std::size_t d = 0; d < dims; ++d) c[d] = static_cast<int>(data.point(i)[d]);
    points.push_back(c);
  }
  const unsigned full = (1u << dims) - 1;
  std::map<unsigned, std::vector<TreePtr>> memo;
  const auto& trees = trees_over(full, memo);
  const Rational r = exact_rational(rho);

  OracleValue out;
  out.trees = trees.size();
  for (const auto& tree : trees) out.phi += tree_weight(*tree, full, points, r);
  out.log_phi = std::log(out.phi.convert_to<double>());
  return out;
}

OracleReport oracle_check(std::size_t dims, std::size_t n, std::size_t trials, std::uint64_t seed, double rho) {
  if (dims < 1 || dims > 3) throw ConfigError("oracle check supports p = 1..3, got " + std::to_string(dims));
  if (n > 5) throw ConfigError("oracle check supports n <= 5, got " + std::to_string(n));
  if (trials < 1) throw ConfigError("oracle check needs at least one trial");
  const PriorSpec spec = PriorSpec::optional_tree(PartitionScheme::binary_table(dims), rho);
  spec.validate();

  OracleReport report;
  report.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    Philox4x32 rng(seed, mix64(t));
    std::vector<double> coords(n * dims);
    for (auto& v : coords) v = (rng() & 1u) ? 2.0 : 1.0;
    const DataIndex data(dims, coords, RegionKind::Discrete);

    PhiTable table;
    const double log_phi =
        compute_log_phi(spec.scheme.root(), data, spec, RecursionLimits::defaults(dims), table);
    const OracleValue exact = brute_force_phi(dims, data, rho);

    const Rational diff = exact_rational(std::exp(log_phi)) - exact.phi;
    const double rel = boost::multiprecision::abs(diff / exact.phi).convert_to<double>();
    report.rel_errors.push_back(rel);
    if (rel > report.max_rel_error || t == 0) {
      report.max_rel_error = rel;
      report.worst_trial = t;
    }
  }
  return report;
}

PhiAuditReport audit_phi_table(const PhiTable& table, const PriorSpec& spec, double tol) {
  PhiAuditReport report;
  for (const auto& [key, entry] : table.sorted_entries()) {
    if (entry->terminal != TerminalKind::Recursed) continue;
    ++report.checked;
    const Region region = region_from_key(key);
    const std::size_t m = num_splits(spec.scheme, region);
    const double rho = stopping_prob(spec, region);
    const double log_not_stop = std::log1p(-rho);
    const auto lambda = selection_probs(spec, region);

    std::vector<double> terms;
    terms.push_back(rho > 0.0 ? std::log(rho) + entry->log_phi0 : -std::numeric_limits<double>::infinity());
    bool complete = true;
    for (std::size_t j = 0; j < m; ++j) {
      const Children kids = split(spec.scheme, region, j);
      const PhiEntry* left = table.find(canonical_key(kids.left));
      const PhiEntry* right = table.find(canonical_key(kids.right));
      if (left == nullptr || right == nullptr) {
        report.failures.push_back(key.to_string() + ": child missing for split " + std::to_string(j));
        complete = false;
        break;
      }
      if (left->count + right->count != entry->count) {
        report.failures.push_back(key.to_string() + ": child counts do not add up");
        complete = false;
        break;
      }
      terms.push_back(log_not_stop + std::log(lambda[j]) +
                      log_dirichlet_ratio({left->count, right->count}, assignment_weights(spec, region, j)) +
                      left->log_phi + right->log_phi);
    }
    if (!complete) continue;
    const double err = std::abs(log_sum_exp(terms) - entry->log_phi);
    report.max_abs_error = std::max(report.max_abs_error, err);
    if (!(err <= tol)) report.failures.push_back(key.to_string() + ": recomputed log Phi differs by " + std::to_string(err));
  }
  return report;
}

}  // namespace optree
