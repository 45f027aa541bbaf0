#include "optree/cli.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "optree/errors.hpp"
#include "optree/estimator.hpp"
#include "optree/evalsuite.hpp"
#include "optree/random.hpp"
#include "optree/sampler.hpp"

namespace optree {

std::string to_string(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Mean: return "mean";
    case EstimatorKind::Hmap: return "hmap";
    case EstimatorKind::Hutter: return "hutter";
    case EstimatorKind::StandardPt: return "standard-pt";
  }
  return "?";
}

EstimatorKind parse_estimator(const std::string& name) {
  if (name == "mean") return EstimatorKind::Mean;
  if (name == "hmap") return EstimatorKind::Hmap;
  if (name == "hutter") return EstimatorKind::Hutter;
  if (name == "standard-pt") return EstimatorKind::StandardPt;
  throw ConfigError("unknown estimator '" + name + "' (mean, hmap, hutter, standard-pt)");
}

SchemeKind parse_scheme(const std::string& name) {
  if (name == "full") return SchemeKind::FullDyadic;
  if (name == "cycling") return SchemeKind::Cycling;
  if (name == "table") return SchemeKind::BinaryTable;
  throw ConfigError("unknown scheme '" + name + "' (full, cycling, table)");
}

AlphaRule parse_alpha_rule(const std::string& name) {
  if (name == "half") return AlphaRule::ConstantHalf;
  if (name == "tau") return AlphaRule::TauScaled;
  if (name == "quadratic") return AlphaRule::QuadraticDepth;
  throw ConfigError("unknown alpha rule '" + name + "' (half, tau, quadratic)");
}

PartitionScheme RunConfig::partition_scheme() const { return {parse_scheme(scheme), dims}; }

PriorSpec RunConfig::prior() const {
  if (parse_estimator(estimator) == EstimatorKind::StandardPt)
    return PriorSpec::standard_polya_tree(partition_scheme());
  return PriorSpec::optional_tree(partition_scheme(), rho, parse_alpha_rule(alpha_rule), tau);
}

RecursionLimits RunConfig::limits() const {
  RecursionLimits limits = RecursionLimits::defaults(dims);
  if (precision_threshold) limits.precision_threshold = *precision_threshold;
  limits.max_level = max_level;
  return limits;
}

std::size_t RunConfig::resolution() const {
  if (partition_scheme().region_kind() == RegionKind::Discrete) return 2;
  return grid_resolution == 0 ? default_grid_resolution(dims) : grid_resolution;
}

void RunConfig::validate() const {
  if (dims < 1) throw ConfigError("dimension must be at least 1");
  const PartitionScheme s = partition_scheme();
  const EstimatorKind kind = parse_estimator(estimator);
  if (parse_alpha_rule(alpha_rule) == AlphaRule::QuadraticDepth)
    throw ConfigError("the quadratic rule is reserved for the standard-pt estimator");
  PriorSpec::optional_tree(s, rho, parse_alpha_rule(alpha_rule), tau).validate();
  prior().validate();
  limits().validate();
  if (s.region_kind() == RegionKind::Continuous && dims > 1 && resolution() > 4096)
    throw ConfigError("grid resolution above 4096 per axis is not supported for p > 1");
  if (s.region_kind() == RegionKind::Continuous && resolution() > (std::size_t{1} << 24))
    throw ConfigError("grid resolution too large");
  if (s.region_kind() == RegionKind::Discrete && dims > 20) throw ConfigError("binary tables support p <= 20");
  if (s.region_kind() == RegionKind::Discrete && rescale) throw ConfigError("rescaling applies to continuous data only");
  if ((kind == EstimatorKind::Mean || kind == EstimatorKind::StandardPt) &&
      !(s.kind == SchemeKind::Cycling || dims == 1))
    throw ConfigError("estimator '" + estimator + "' needs one split per region: use the cycling scheme or p = 1");
  if (!truth.empty()) {
    const GeneratorKind g = parse_generator(truth);
    if (g == GeneratorKind::Custom) throw ConfigError("Custom truth is not available from the command line");
    if (GeneratorSpec::named(g).dims() != dims || s.region_kind() != RegionKind::Continuous)
      throw ConfigError("truth generator '" + truth + "' does not match the data dimension");
  }
  if (input.empty()) throw ConfigError("no input file given");
}

Json RunConfig::to_json() const {
  Json out;
  out["scheme"] = scheme;
  out["dims"] = dims;
  out["rho"] = rho;
  out["alpha_rule"] = alpha_rule;
  out["tau"] = tau;
  out["estimator"] = estimator;
  out["precision_threshold"] = limits().precision_threshold;
  out["max_level"] = max_level;
  out["seed"] = seed;
  out["grid_resolution"] = resolution();
  out["rescale"] = rescale;
  out["truth"] = truth;
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

CsvData read_csv(const std::filesystem::path& path, std::size_t dims) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open input file " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  CsvData out;
  out.dims = dims;
  out.coords.reserve(lines.size() * dims);
  for (std::size_t row = 0; row < lines.size(); ++row) {
    std::string_view rest = lines[row];
    std::size_t col = 0;
    for (;;) {
      const auto comma = rest.find(',');
      const std::string_view cell = trim(rest.substr(0, comma));
      ++col;
      if (col > dims)
        throw DataError(fmt::format("row {}: expected {} columns, found more", row + 1, dims));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        throw DataError(fmt::format("row {}, column {}: cannot parse '{}' as a number", row + 1, col, cell));
      out.coords.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (col != dims) throw DataError(fmt::format("row {}: expected {} columns, found {}", row + 1, dims, col));
  }
  return out;
}

Rescaling rescale_in_place(CsvData& data) {
  Rescaling r;
  r.applied = true;
  const std::size_t p = data.dims;
  r.lower.assign(p, std::numeric_limits<double>::infinity());
  r.upper.assign(p, -std::numeric_limits<double>::infinity());
  const std::size_t n = data.coords.size() / p;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < p; ++d) {
      r.lower[d] = std::min(r.lower[d], data.coords[i * p + d]);
      r.upper[d] = std::max(r.upper[d], data.coords[i * p + d]);
    }
  for (std::size_t d = 0; d < p; ++d) {
    if (n == 0) {
      r.lower[d] = 0.0;
      r.upper[d] = 1.0;
    }
    const double span = r.upper[d] - r.lower[d];
    for (std::size_t i = 0; i < n; ++i) {
      double& v = data.coords[i * p + d];
      v = span > 0.0 ? std::clamp((v - r.lower[d]) / span, 0.0, 1.0) : 0.5;
    }
  }
  return r;
}

namespace {

struct EstimateOptions {
  RunConfig config;
  std::size_t threads = 1;
};

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

int cmd_estimate(const EstimateOptions& opts) {
  const auto started = std::chrono::steady_clock::now();
  const RunConfig& cfg = opts.config;
  cfg.validate();
  const PartitionScheme scheme = cfg.partition_scheme();
  const PriorSpec prior = cfg.prior();
  const RecursionLimits limits = cfg.limits();
  const EstimatorKind kind = parse_estimator(cfg.estimator);

  CsvData csv = read_csv(cfg.input, cfg.dims);
  Rescaling rescaling;
  if (cfg.rescale) rescaling = rescale_in_place(csv);
  const DataIndex data(cfg.dims, std::move(csv.coords), scheme.region_kind());

  PhiTable table;
  PhiSolver solver(data, prior, limits, table, opts.threads);
  const double log_phi_root = solver.compute_log_phi(scheme.root());

  const std::filesystem::path out_dir = cfg.output_dir;
  std::filesystem::create_directories(out_dir);

  Json meta;
  meta["format_version"] = kFormatVersion;
  meta["command"] = "estimate";
  meta["config"] = cfg.to_json();
  meta["config_hash"] = hex64(fnv1a64(cfg.to_json().dump()));
  meta["data"] = {{"rows", data.size()}, {"dims", data.dims()}};
  Json rescale_json;
  rescale_json["applied"] = rescaling.applied;
  if (rescaling.applied) {
    rescale_json["lower"] = rescaling.lower;
    rescale_json["upper"] = rescaling.upper;
    rescale_json["map"] = "x' = (x - lower) / (upper - lower)";
  }
  meta["rescale"] = std::move(rescale_json);
  meta["prior"] = {{"rho", prior.rho},
                   {"alpha_rule", to_string(prior.alpha_rule)},
                   {"tau", prior.tau},
                   {"standard_polya_tree", prior.is_standard_polya_tree()}};
  meta["log_phi_root"] = log_phi_root;

  DensityGrid grid;
  std::optional<PiecewiseDensity> density;
  TreeTopology tree = hmap_tree(solver);
  tree.validate();
  switch (kind) {
    case EstimatorKind::Mean:
    case EstimatorKind::StandardPt:
      density = mean_density_dichotomous(solver, limits.max_level);
      break;
    case EstimatorKind::Hmap:
      density = conditional_mean_density(tree, table);
      break;
    case EstimatorKind::Hutter: {
      grid = make_grid(cfg.dims, cfg.resolution(), scheme.region_kind() == RegionKind::Discrete);
      std::vector<std::vector<double>> points;
      points.reserve(grid.cell_count());
      for (std::size_t i = 0; i < grid.cell_count(); ++i) points.push_back(grid.cell_center(i));
      grid.values = hutter_point_densities(points, solver, opts.threads);
      meta["grid_values"] = "density at cell centres";
      break;
    }
  }
  if (density) {
    density->validate();
    grid = density_grid(*density, cfg.resolution());
    meta["grid_values"] = "cell averages";
    meta["density"] = {{"pieces", density->pieces.size()}, {"integral", density->integral()}};
    write_json_file(out_dir / "density.json", density_json(*density));
  }
  meta["grid"] = {{"resolution", grid.resolution}, {"cells", grid.cell_count()}};
  meta["tree"] = {{"leaves", tree.leaves().size()}, {"depth", tree.depth()}};
  meta["phi_table_entries"] = table.size();

  Json flags = Json::array();
  if (!cfg.truth.empty()) {
    const GeneratorSpec truth = GeneratorSpec::named(parse_generator(cfg.truth));
    Json t;
    t["generator"] = to_string(truth.kind);
    if (density) {
      const L1Result l1 = l1_distance(*density, truth);
      t["l1"] = l1.value;
      t["l1_std_error"] = l1.std_error;
      t["l1_exact"] = l1.exact;
    } else {
      t["l1"] = nullptr;
      t["l1_note"] = "point estimator; no piecewise density to compare";
    }
    meta["truth"] = std::move(t);
    if (truth.kind == GeneratorKind::BivariateNormal2D) {
      flags.push_back({{"flag", "bivariate_normal_mean_discrepancy"},
                       {"mean_used", {kNormalMean[0], kNormalMean[1]}},
                       {"mean_alternative", {kNormalMean[1], kNormalMean[0]}}});
    }
  }
  if (kind == EstimatorKind::Hutter)
    flags.push_back({{"flag", "hutter_vs_posterior_mean"},
                     {"note", "point estimate; agrees with the dichotomous posterior mean for p = 1"}});
  meta["open_question_flags"] = std::move(flags);

  {
    std::ostringstream csv_out;
    write_grid_csv(csv_out, grid);
    write_text_file(out_dir / "density_grid.csv", csv_out.str());
  }
  write_json_file(out_dir / "tree.json", tree_json(tree));
  write_json_file(out_dir / "phi_table.json", phi_table_json(table));
  if (cfg.record_runtime)
    meta["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  write_json_file(out_dir / "metadata.json", meta);

  std::cerr << fmt::format("estimate: n = {}, log Phi(root) = {:.17g}, {} table entries, {} leaves\n", data.size(),
                           log_phi_root, table.size(), tree.leaves().size());
  return 0;
}

std::vector<UniformBox> read_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open boxes file " + path);
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError("boxes file " + path + ": " + e.what());
  }
  std::vector<UniformBox> boxes;
  try {
    for (const auto& b : doc) boxes.push_back({b.at("weight").get<double>(), b.at("lower").get<std::vector<double>>(),
                                               b.at("upper").get<std::vector<double>>()});
  } catch (const Json::exception& e) {
    throw ConfigError("boxes file " + path + ": " + e.what());
  }
  return boxes;
}

struct SimulateOptions {
  std::string generator;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  std::string boxes;
  std::size_t threads = 1;
};

int cmd_simulate(const SimulateOptions& opts) {
  const GeneratorKind kind = parse_generator(opts.generator);
  GeneratorSpec spec = kind == GeneratorKind::Custom
                           ? (opts.boxes.empty() ? throw ConfigError("Custom generator needs --boxes")
                                                 : GeneratorSpec::custom(read_boxes(opts.boxes), opts.seed))
                           : GeneratorSpec::named(kind, opts.seed);
  if (opts.n < 1) throw ConfigError("n must be at least 1");
  if (opts.out.empty()) throw ConfigError("no output path given");
  const Dataset data = generate(spec, opts.n, opts.threads);
  std::ostringstream csv;
  write_rows_csv(csv, data.dims, data.coords);
  write_text_file(opts.out, csv.str());
  std::cerr << fmt::format("simulate: {} rows of {} written to {}, {} rejected proposals\n", data.size(),
                           to_string(kind), opts.out, data.rejections);
  return 0;
}

struct SamplePriorOptions {
  std::string scheme = "full";
  std::size_t dims = 1;
  double rho = 0.5;
  std::string alpha_rule = "half";
  double tau = 2.0;
  std::size_t draws = 1;
  std::uint32_t max_depth = 10;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t threads = 1;
};

int cmd_sample_prior(const SamplePriorOptions& opts) {
  if (opts.dims < 1) throw ConfigError("dimension must be at least 1");
  const PartitionScheme scheme{parse_scheme(opts.scheme), opts.dims};
  const AlphaRule rule = parse_alpha_rule(opts.alpha_rule);
  PriorSpec spec = rule == AlphaRule::QuadraticDepth
                       ? PriorSpec::standard_polya_tree(scheme)
                       : PriorSpec::optional_tree(scheme, opts.rho == 1.0 ? 0.5 : opts.rho, rule, opts.tau);
  // rho = 1 is a valid prior to sample from (every draw is uniform) but not to estimate with.
  if (opts.rho == 1.0 && rule != AlphaRule::QuadraticDepth) spec.rho = 1.0;
  if (opts.max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (opts.draws < 1) throw ConfigError("draws must be at least 1");
  if (opts.out.empty()) throw ConfigError("no output path given");

  const PriorSource source(spec);

  std::vector<RandomMeasureDraw> draws;
  for (std::size_t i = 0; i < opts.draws; ++i)
    draws.push_back(sample_measure(source, scheme, opts.max_depth, derive_seed(opts.seed, i), opts.threads));
  Json doc = draws_json(draws);
  doc["config"] = {{"scheme", opts.scheme}, {"dims", opts.dims},          {"rho", spec.rho},
                   {"alpha_rule", opts.alpha_rule}, {"tau", opts.tau}, {"max_depth", opts.max_depth},
                   {"seed", opts.seed},       {"draws", opts.draws}};
  doc["rng"] = "philox4x32-10; key = seed, counter high word = region stream";
  write_json_file(opts.out, doc);
  std::cerr << fmt::format("sample-prior: {} draws written to {}\n", draws.size(), opts.out);
  return 0;
}

struct OracleOptions {
  std::size_t dims = 2;
  std::size_t n = 3;
  std::size_t trials = 50;
  std::uint64_t seed = 0;
  double rho = 0.5;
  std::string out;
};

int cmd_oracle_check(const OracleOptions& opts) {
  const OracleReport report = oracle_check(opts.dims, opts.n, opts.trials, opts.seed, opts.rho);
  const bool ok = report.max_rel_error < kOracleTolerance;
  std::cout << fmt::format("oracle-check p={} n={} trials={} rho={}: max relative error {:.3e} (trial {}) {}\n",
                           opts.dims, opts.n, report.trials, opts.rho, report.max_rel_error, report.worst_trial,
                           ok ? "PASS" : "FAIL");
  if (!opts.out.empty()) {
    Json doc;
    doc["format_version"] = kFormatVersion;
    doc["dims"] = opts.dims;
    doc["n"] = opts.n;
    doc["trials"] = report.trials;
    doc["seed"] = opts.seed;
    doc["rho"] = opts.rho;
    doc["tolerance"] = kOracleTolerance;
    doc["max_rel_error"] = report.max_rel_error;
    doc["worst_trial"] = report.worst_trial;
    doc["rel_errors"] = report.rel_errors;
    doc["pass"] = ok;
    write_json_file(opts.out, doc);
  }
  return ok ? 0 : 1;
}

void add_threads(CLI::App* cmd, std::size_t& threads) {
  cmd->add_option("--threads", threads, "worker cap (falls back to OPTREE_THREADS)")
      ->envname("OPTREE_THREADS")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Optional Polya tree density estimation"};
  app.set_config("--config", "", "TOML or INI config file; flags override it");
  app.require_subcommand(1);

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "posterior density estimate from a CSV file");
  estimate->add_option("--input,-i", est.config.input, "headerless CSV, one observation per row");
  estimate->add_option("--out-dir,-o", est.config.output_dir, "artifact directory");
  estimate->add_option("--scheme", est.config.scheme, "full | cycling | table");
  estimate->add_option("--dims,-p", est.config.dims, "dimension p");
  estimate->add_option("--rho", est.config.rho, "prior stopping probability");
  estimate->add_option("--alpha-rule", est.config.alpha_rule, "half | tau");
  estimate->add_option("--tau", est.config.tau, "scale for the tau rule");
  estimate->add_option("--estimator,-e", est.config.estimator, "mean | hmap | hutter | standard-pt");
  estimate->add_option("--precision-threshold", est.config.precision_threshold, "smallest region measure");
  estimate->add_option("--max-level", est.config.max_level, "deepest level recursed");
  estimate->add_option("--seed", est.config.seed, "recorded for provenance");
  estimate->add_option("--grid-resolution", est.config.grid_resolution, "cells per axis (0: default)");
  estimate->add_flag("--rescale", est.config.rescale, "map each column from its [min,max] onto [0,1]");
  estimate->add_option("--truth", est.config.truth, "generator to report an L1 error against");
  estimate->add_flag("--record-runtime", est.config.record_runtime, "add wall time to metadata.json");
  add_threads(estimate, est.threads);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "draw a dataset from a reference generator");
  simulate->add_option("--generator,-g", sim.generator, "SpikyUniforms | BetaMixture | UniformSemiBeta2D | "
                                                        "BivariateNormal2D | Custom")
      ->required();
  simulate->add_option("--n,-n", sim.n, "sample size")->required();
  simulate->add_option("--seed", sim.seed, "generator seed");
  simulate->add_option("--out,-o", sim.out, "CSV path")->required();
  simulate->add_option("--boxes", sim.boxes, "JSON list of {weight, lower, upper} for Custom");
  add_threads(simulate, sim.threads);

  SamplePriorOptions sp;
  auto* sample = app.add_subcommand("sample-prior", "random partitions and measures drawn from the prior");
  sample->add_option("--scheme", sp.scheme, "full | cycling | table");
  sample->add_option("--dims,-p", sp.dims, "dimension p");
  sample->add_option("--rho", sp.rho, "prior stopping probability");
  sample->add_option("--alpha-rule", sp.alpha_rule, "half | tau | quadratic");
  sample->add_option("--tau", sp.tau, "scale for the tau rule");
  sample->add_option("--draws", sp.draws, "number of draws");
  sample->add_option("--max-depth", sp.max_depth, "levels sampled before cutting off");
  sample->add_option("--seed", sp.seed, "base seed");
  sample->add_option("--out,-o", sp.out, "JSON path")->required();
  add_threads(sample, sp.threads);

  OracleOptions oc;
  auto* oracle = app.add_subcommand("oracle-check", "compare the recursion with exact tree enumeration");
  oracle->add_option("--dims,-p", oc.dims, "table dimension (<= 3)");
  oracle->add_option("--n,-n", oc.n, "observations per dataset (<= 5)");
  oracle->add_option("--trials", oc.trials, "random datasets");
  oracle->add_option("--seed", oc.seed, "seed");
  oracle->add_option("--rho", oc.rho, "prior stopping probability");
  oracle->add_option("--out,-o", oc.out, "optional JSON report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*estimate) return cmd_estimate(est);
    if (*simulate) return cmd_simulate(sim);
    if (*sample) return cmd_sample_prior(sp);
    if (*oracle) return cmd_oracle_check(oc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const NumericalFault& e) {
    std::cerr << "numerical fault: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 70;
  }
  return 2;
}

}  // namespace optree
