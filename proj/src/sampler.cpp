#include "optree/sampler.hpp"

#include <bit>
#include <cmath>
#include <future>
#include <stdexcept>

#include <boost/random/beta_distribution.hpp>

#include "optree/errors.hpp"
#include "optree/random.hpp"

namespace optree {

namespace {

constexpr std::uint64_t kSamplerSalt = 0x53414D504C455231ull;

RegionParams prior_params(const PriorSpec& spec, const Region& region) {
  RegionParams out;
  out.rho = stopping_prob(spec, region);
  const std::size_t m = num_splits(spec.scheme, region);
  if (m > 0) {
    out.lambda = selection_probs(spec, region);
    for (std::size_t j = 0; j < m; ++j) out.alpha.push_back(assignment_weights(spec, region, j));
  }
  return out;
}

std::size_t pick(std::span<const double> probs, double u) {
  double acc = 0.0;
  for (std::size_t j = 0; j + 1 < probs.size(); ++j) {
    acc += probs[j];
    if (u < acc) return j;
  }
  return probs.size() - 1;
}

struct Partial {
  std::vector<DrawPiece> pieces;
  std::vector<double> live;  // relative to the subtree root's level
};

class Walker {
 public:
  Walker(const ParameterSource& source, std::uint32_t max_depth, std::uint64_t seed, std::size_t threads)
      : source_(source),
        scheme_(source.scheme()),
        max_depth_(max_depth),
        seed_(seed),
        parallel_levels_(threads > 1 ? static_cast<std::uint32_t>(std::bit_width(threads)) : 0) {}

  Partial walk(const Region& region, double mass, bool empty_hint) const {
    Partial out;
    out.live.push_back(mass);
    if (region.level() >= max_depth_) {
      out.pieces.push_back({region, mass, false});
      return out;
    }
    const std::size_t m = num_splits(scheme_, region);
    const RegionParams params = source_.params(region, empty_hint);

    Philox4x32 rng(seed_, region_stream(canonical_key(region), kSamplerSalt));
    const double u_stop = uniform01(rng);
    const double u_pick = uniform01(rng);
    if (m == 0 || u_stop < params.rho) {
      out.pieces.push_back({region, mass, true});
      return out;
    }
    if (params.lambda.size() != m || params.alpha.size() != m)
      throw std::logic_error("parameter source returned the wrong number of splits");

    const std::size_t j = pick(params.lambda, u_pick);
    const BetaPair a = params.alpha[j];
    const double theta = boost::random::beta_distribution<double>(a.left, a.right)(rng);
    const double left_mass = mass * theta;
    const double right_mass = mass - left_mass;
    const Children kids = split(scheme_, region, j);

    Partial left, right;
    if (region.level() < parallel_levels_) {
      auto pending = std::async(std::launch::async,
                                [&] { return walk(kids.right, right_mass, params.empty); });
      left = walk(kids.left, left_mass, params.empty);
      right = pending.get();
    } else {
      left = walk(kids.left, left_mass, params.empty);
      right = walk(kids.right, right_mass, params.empty);
    }

    out.pieces = std::move(left.pieces);
    out.pieces.insert(out.pieces.end(), std::make_move_iterator(right.pieces.begin()),
                      std::make_move_iterator(right.pieces.end()));
    const std::size_t span = std::max(left.live.size(), right.live.size());
    out.live.resize(1 + span, 0.0);
    for (std::size_t k = 0; k < span; ++k) {
      const double l = k < left.live.size() ? left.live[k] : 0.0;
      const double r = k < right.live.size() ? right.live[k] : 0.0;
      out.live[k + 1] = l + r;
    }
    return out;
  }

 private:
  const ParameterSource& source_;
  const PartitionScheme& scheme_;
  std::uint32_t max_depth_;
  std::uint64_t seed_;
  std::uint32_t parallel_levels_;
};

}  // namespace

PriorSource::PriorSource(PriorSpec spec) : spec_(std::move(spec)) {
  // Sampling also admits rho = 1 (every draw is the uniform measure).
  if (spec_.rho == 1.0 && !spec_.is_standard_polya_tree()) {
    PriorSpec probe = spec_;
    probe.rho = 0.5;
    probe.validate();
  } else {
    spec_.validate();
  }
}

RegionParams PriorSource::params(const Region& region, bool) const { return prior_params(spec_, region); }

RegionParams PosteriorSource::params(const Region& region, bool empty_hint) const {
  if (empty_hint) {
    RegionParams out = prior_params(solver_.spec(), region);
    out.empty = true;
    return out;
  }
  const PhiEntry& e = solver_.ensure(region);
  return {e.post_rho, e.post_lambda, e.post_alpha, e.count == 0};
}

double RandomMeasureDraw::total_mass() const {
  double total = 0.0;
  for (const auto& piece : pieces) total += piece.mass;
  return total;
}

PiecewiseDensity RandomMeasureDraw::density() const {
  if (pieces.empty()) throw std::logic_error("empty draw");
  PiecewiseDensity out;
  out.scheme = scheme;
  for (const auto& piece : pieces) out.pieces.push_back({piece.region, piece.mass / measure(piece.region)});
  return out;
}

RandomMeasureDraw sample_measure(const ParameterSource& source, const PartitionScheme& scheme,
                                 std::uint32_t max_depth, std::uint64_t seed, std::size_t threads) {
  if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (scheme.region_kind() == RegionKind::Continuous && max_depth > kMaxDyadicDepth)
    throw ConfigError("max_depth must not exceed " + std::to_string(kMaxDyadicDepth));
  if (!(source.scheme() == scheme)) throw std::invalid_argument("parameter source uses a different scheme");

  const Walker walker(source, max_depth, seed, threads);
  Partial all = walker.walk(scheme.root(), 1.0, false);

  RandomMeasureDraw draw;
  draw.scheme = scheme;
  draw.seed = seed;
  draw.pieces = std::move(all.pieces);
  draw.live_mass.assign(max_depth + 1, 0.0);
  for (std::size_t k = 0; k < all.live.size() && k <= max_depth; ++k) draw.live_mass[k] = all.live[k];
  for (const auto& piece : draw.pieces) draw.depth = std::max(draw.depth, piece.region.level());
  return draw;
}

std::vector<MassPoint> unstopped_mass_curve(const PriorSpec& spec, const PartitionScheme& scheme,
                                            std::span<const std::uint32_t> depths, std::size_t n_draws,
                                            std::uint64_t seed, std::size_t threads) {
  if (n_draws < 100) throw ConfigError("n_draws must be at least 100");
  if (depths.empty()) throw ConfigError("no depths requested");
  std::uint32_t max_k = 1;
  for (auto k : depths) max_k = std::max(max_k, k);

  PriorSpec prior = spec;
  prior.scheme = scheme;
  const PriorSource source(prior);

  std::vector<std::vector<double>> live(n_draws);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_draws));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i)
      live[i] = sample_measure(source, scheme, max_k, derive_seed(seed, i)).live_mass;
  };
  if (workers == 1) {
    run(0, n_draws);
  } else {
    std::vector<std::future<void>> pool;
    const std::size_t chunk = (n_draws + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(n_draws, begin + chunk);
      if (begin < end) pool.push_back(std::async(std::launch::async, run, begin, end));
    }
    for (auto& f : pool) f.get();
  }

  std::vector<MassPoint> out;
  const double n = static_cast<double>(n_draws);
  for (auto k : depths) {
    double sum = 0.0;
    for (const auto& l : live) sum += l[k];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& l : live) ss += (l[k] - mean) * (l[k] - mean);
    out.push_back({k, mean, std::sqrt(ss / (n - 1.0) / n)});
  }
  return out;
}

}  // namespace optree
