#include "nilmix/cli_runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "nilmix/config.hpp"
#include "nilmix/equidistribution.hpp"
#include "nilmix/errors.hpp"
#include "nilmix/observables.hpp"
#include "nilmix/report.hpp"
#include "nilmix/spectral.hpp"
#include "nilmix/stochastics.hpp"

namespace nilmix {
namespace {

using nlohmann::json;

const json& need(const json& cmd, const char* key, const char* command) {
  const auto it = cmd.find(key);
  if (it == cmd.end())
    throw ConfigError(std::string(command) + ": missing required key \"" +
                      key + "\"");
  return *it;
}

std::vector<long long> ll_list(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(what) + ": expected a nonempty array");
  std::vector<long long> out;
  for (const auto& e : j) {
    if (!e.is_number_integer())
      throw ConfigError(std::string(what) + ": entries must be integers");
    out.push_back(e.get<long long>());
  }
  return out;
}

std::vector<double> d_list(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    throw ConfigError(std::string(what) + ": expected a nonempty array");
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number())
      throw ConfigError(std::string(what) + ": entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

VecD vec_of_dim(const json& j, int dim, const char* what) {
  VecD v = d_list(j, what);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(std::string(what) + ": expected " + std::to_string(dim) +
                      " coordinates, got " + std::to_string(v.size()));
  return v;
}

// second-kind coordinates, reduced into the fundamental domain on read
Point point_of(const Nilmanifold& m, const json& j, const char* what) {
  return m.reduce(vec_of_dim(j, m.dim(), what)).point;
}

Point origin(const Nilmanifold& m) {
  return m.reduce(VecD(m.dim(), 0.0)).point;
}

// shared context for one command invocation
struct Ctx {
  const ExperimentConfig& cfg;
  const json& cmd;
  const Nilmanifold& m;
  const Automorphism& aut;
  std::filesystem::path csv;
};

json fit_json(const RateReport& rep, FitModel model) {
  json s;
  s["mu"] = rep.mu;
  s["total_budget"] = rep.total_budget;
  s["flags"] = rep.flags;
  if (rep.fit) {
    s["rate"] = rep.fit->rate;
    s["r2"] = rep.fit->r2;
    s["points_used"] = rep.fit->points_used;
    s["fit_flags"] = rep.fit->flags;
    if (model == FitModel::LogLinear)
      s["rho_hat"] = std::exp(-rep.fit->rate);
    else
      s["kappa_hat"] = rep.fit->rate;
  }
  return s;
}

void write_rate_csv(const RateReport& rep, const std::string& param_col,
                    const std::string& mean_col,
                    const std::filesystem::path& path) {
  ReportTable t = to_table(rep);
  t.columns[0] = param_col;
  t.columns[1] = mean_col;
  write_csv(t, path);
}

std::vector<long long> default_schedule(long long lo, long long hi) {
  std::vector<long long> s;
  for (long long n = lo; n <= hi; ++n) s.push_back(n);
  return s;
}

// --- check -------------------------------------------------------------

json run_check(const Ctx& c, int& exit_code) {
  const ErgodicityCertificate cert = c.aut.is_ergodic();
  const JordanSplit split = jordan_split(c.aut);
  const auto lcs = c.m.algebra().lower_central_series();

  json s;
  s["dim"] = c.m.dim();
  s["step"] = static_cast<int>(lcs.size());
  std::vector<int> lcs_dims;
  for (const auto& term : lcs) lcs_dims.push_back(static_cast<int>(term.size()));
  s["lcs_dims"] = lcs_dims;
  s["metric_scale"] = c.m.metric_scale();
  s["ergodic"] = cert.ergodic;
  if (!cert.ergodic) s["witness_order"] = cert.witness_order;
  s["orders_checked"] = cert.orders_checked;
  std::vector<std::string> poly;
  for (const auto& q : cert.abelian_char_poly) poly.push_back(to_string(q));
  s["abelian_char_poly"] = poly;
  s["unstable_dim"] = static_cast<int>(split.unstable.size());
  s["central_dim"] = static_cast<int>(split.central.size());
  s["stable_dim"] = static_cast<int>(split.stable.size());

  ReportTable t;
  t.columns = {"block", "re", "im", "modulus", "chain_length", "class"};
  json blocks = json::array();
  for (size_t i = 0; i < split.blocks.size(); ++i) {
    const JordanBlock& b = split.blocks[i];
    const int idx = static_cast<int>(i);
    std::string cls = "central";
    for (int u : split.unstable_blocks)
      if (u == idx) cls = "unstable";
    for (int u : split.stable_blocks)
      if (u == idx) cls = "stable";
    t.add_row({std::to_string(idx), format_num(b.re), format_num(b.im),
               format_num(b.modulus), std::to_string(b.chain_length), cls});
    blocks.push_back({{"re", b.re},
                      {"im", b.im},
                      {"modulus", b.modulus},
                      {"chain_length", b.chain_length},
                      {"class", cls}});
  }
  s["blocks"] = blocks;
  write_csv(t, c.csv);

  std::cout << "dim " << c.m.dim() << ", step " << lcs.size()
            << ", lower central dims";
  for (int d : lcs_dims) std::cout << " " << d;
  std::cout << "\n";
  std::cout << (cert.ergodic ? "ergodic: yes"
                             : "ergodic: NO (root of unity of order " +
                                   std::to_string(cert.witness_order) + ")")
            << "\n";
  for (size_t i = 0; i < split.blocks.size(); ++i) {
    const JordanBlock& b = split.blocks[i];
    std::cout << "block " << i << ": |lambda| = " << b.modulus << " ("
              << blocks[i]["class"].get<std::string>() << ", chain "
              << b.chain_length << (b.complex_pair ? ", complex pair" : "")
              << ")\n";
  }
  if (!cert.ergodic) exit_code = 1;
  return s;
}

// --- mixing / multimix ---------------------------------------------------

json run_mixing(const Ctx& c) {
  const Observable f0 =
      observable_from_json(c.m, need(c.cmd, "f0", "mixing"));
  const Observable f1 =
      observable_from_json(c.m, need(c.cmd, "f1", "mixing"));
  const auto sched = c.cmd.contains("n_schedule")
                         ? ll_list(c.cmd.at("n_schedule"), "mixing.n_schedule")
                         : default_schedule(1, 12);
  const auto budget = c.cmd.value("budget", std::uint64_t{100000});
  const int maxd = c.cmd.value("max_doublings", 6);

  OrbitEngine eng(c.aut, c.cfg.horizon);
  const RateReport rep = mixing_experiment(eng, f0, f1, sched, budget,
                                           c.cfg.seed, c.cfg.workers, maxd);
  write_rate_csv(rep, "n", "C_n", c.csv);
  json s = fit_json(rep, FitModel::LogLinear);
  if (rep.fit)
    std::cout << "mixing: rho_hat = " << std::exp(-rep.fit->rate)
              << ", r2 = " << rep.fit->r2 << "\n";
  else
    std::cout << "mixing: no usable fit\n";
  return s;
}

json run_multimix(const Ctx& c) {
  const json& fspecs = need(c.cmd, "fs", "multimix");
  if (!fspecs.is_array() || fspecs.size() < 2)
    throw ConfigError("multimix: \"fs\" needs at least two observables");
  std::vector<Observable> fs;
  for (const auto& e : fspecs) fs.push_back(observable_from_json(c.m, e));
  const auto sched =
      c.cmd.contains("gap_schedule")
          ? ll_list(c.cmd.at("gap_schedule"), "multimix.gap_schedule")
          : default_schedule(1, 8);
  const auto budget = c.cmd.value("budget", std::uint64_t{100000});
  const int maxd = c.cmd.value("max_doublings", 6);

  OrbitEngine eng(c.aut, c.cfg.horizon);
  const RateReport rep = multimix_experiment(eng, fs, sched, budget,
                                             c.cfg.seed, c.cfg.workers, maxd);
  write_rate_csv(rep, "gap", "estimate", c.csv);
  json s = fit_json(rep, FitModel::LogLinear);
  s["observables"] = fs.size();
  if (rep.fit)
    std::cout << "multimix: rho_hat = " << std::exp(-rep.fit->rate)
              << ", r2 = " << rep.fit->r2 << "\n";
  else
    std::cout << "multimix: no usable fit\n";
  return s;
}

// --- equid ---------------------------------------------------------------

json run_equid(const Ctx& c) {
  const int d = c.m.dim();
  const Observable f = observable_from_json(c.m, need(c.cmd, "f", "equid"));
  const json& dirspec = need(c.cmd, "dirs", "equid");
  if (!dirspec.is_array() || dirspec.empty())
    throw ConfigError("equid: \"dirs\" must be a nonempty array of vectors");
  std::vector<VecD> dirs;
  for (const auto& e : dirspec) dirs.push_back(vec_of_dim(e, d, "equid.dirs"));
  const VecD v = c.cmd.contains("v")
                     ? vec_of_dim(c.cmd.at("v"), d, "equid.v")
                     : VecD(d, 0.0);
  const VecD u = c.cmd.contains("u")
                     ? vec_of_dim(c.cmd.at("u"), d, "equid.u")
                     : VecD(d, 0.0);
  const Point g = c.cmd.contains("g") ? point_of(c.m, c.cmd.at("g"), "equid.g")
                                      : origin(c.m);
  const auto ts = c.cmd.contains("t_schedule")
                      ? d_list(c.cmd.at("t_schedule"), "equid.t_schedule")
                      : std::vector<double>{1, 2, 4, 8, 16, 32};
  const auto budget = c.cmd.value("budget", std::uint64_t{4096});
  const int panel = c.cmd.value("panel", 16);
  const int maxd = c.cmd.value("max_doublings", 6);

  const RateReport rep = box_rate_experiment(
      f, v, dirs, u, g, ts, budget, c.cfg.seed, c.cfg.workers, panel, maxd);
  write_rate_csv(rep, "T", "mean", c.csv);
  json s = fit_json(rep, FitModel::LogLog);
  if (rep.fit)
    std::cout << "equid: kappa_hat = " << rep.fit->rate
              << ", r2 = " << rep.fit->r2 << "\n";
  else
    std::cout << "equid: no usable fit\n";

  if (c.cmd.contains("dichotomy")) {
    const json& dj = c.cmd.at("dichotomy");
    const double delta = need(dj, "delta", "equid.dichotomy").get<double>();
    const double l1 = dj.value("l1", 1.0);
    const double l2 = dj.value("l2", 2.0);
    const double mult = dj.value("multiplier", 1.0);
    const VecD sides =
        dj.contains("sides")
            ? vec_of_dim(dj.at("sides"), static_cast<int>(dirs.size()),
                         "equid.dichotomy.sides")
            : VecD(dirs.size(), ts.back());
    const BoxMap box = BoxMap::validate(v, dirs, sides);
    const auto lcs = c.m.algebra().lower_central_series();
    const int l = lcs.size() >= 2 ? d - static_cast<int>(lcs[1].size()) : d;
    const DichotomyResult dr = dichotomy_probe(box, l, delta, l1, l2, mult);
    json dsum;
    dsum["equidistributed"] = dr.equidistributed;
    dsum["z_bound"] = dr.z_bound;
    dsum["pairing_bounds"] = dr.pairing_bounds;
    dsum["candidates"] = dr.candidates;
    if (!dr.equidistributed) dsum["z"] = dr.z;
    s["dichotomy"] = dsum;
    std::cout << "dichotomy: "
              << (dr.equidistributed ? "no obstruction" : "obstruction found")
              << " (" << dr.candidates << " candidates)\n";
  }
  return s;
}

// --- unstable --------------------------------------------------------------

json run_unstable(const Ctx& c) {
  const Observable f = observable_from_json(c.m, need(c.cmd, "f", "unstable"));
  const JordanSplit split = jordan_split(c.aut);
  const int sdim = static_cast<int>(split.unstable.size());
  const VecD sides =
      c.cmd.contains("sides")
          ? vec_of_dim(c.cmd.at("sides"), sdim, "unstable.sides")
          : VecD(std::max(sdim, 1), 1.0);
  const UnstableChart chart = UnstableChart::build(split, sides);
  const Point h = c.cmd.contains("h")
                      ? point_of(c.m, c.cmd.at("h"), "unstable.h")
                      : origin(c.m);
  const Point g = c.cmd.contains("g")
                      ? point_of(c.m, c.cmd.at("g"), "unstable.g")
                      : origin(c.m);
  std::vector<int> sched;
  if (c.cmd.contains("n_schedule")) {
    for (long long n : ll_list(c.cmd.at("n_schedule"), "unstable.n_schedule"))
      sched.push_back(static_cast<int>(n));
  } else {
    for (int n = 0; n <= 10; ++n) sched.push_back(n);
  }
  const auto budget = c.cmd.value("budget", std::uint64_t{8192});
  const int maxd = c.cmd.value("max_doublings", 6);

  const RateReport rep = unstable_rate_experiment(
      f, c.aut, chart, h, g, sched, budget, c.cfg.seed, c.cfg.workers, maxd);
  write_rate_csv(rep, "n", "mean", c.csv);
  json s = fit_json(rep, FitModel::LogLinear);
  s["unstable_dim"] = sdim;
  if (rep.fit)
    std::cout << "unstable: rho_hat = " << std::exp(-rep.fit->rate)
              << ", r2 = " << rep.fit->r2 << "\n";
  else
    std::cout << "unstable: no usable fit\n";
  return s;
}

// --- clt / donsker -----------------------------------------------------

json run_clt(const Ctx& c) {
  const Observable f = observable_from_json(c.m, need(c.cmd, "f", "clt"));
  const auto sched = c.cmd.contains("n_schedule")
                         ? ll_list(c.cmd.at("n_schedule"), "clt.n_schedule")
                         : std::vector<long long>{64, 256, 1024, 4096};
  const auto paths = c.cmd.value("paths", std::uint64_t{10000});
  const int window = c.cmd.value("window", 32);
  const auto gk_budget = c.cmd.value("gk_budget", std::uint64_t{65536});

  OrbitEngine eng(c.aut, c.cfg.horizon);
  const CltReport rep = clt_experiment(eng, f, sched, paths, window, gk_budget,
                                       c.cfg.seed, c.cfg.workers);
  ReportTable t;
  t.columns = {"n", "ks", "empirical_var"};
  for (size_t i = 0; i < rep.n_schedule.size(); ++i)
    t.add_row({std::to_string(rep.n_schedule[i]),
               format_num(rep.ks_statistics[i]),
               format_num(rep.empirical_variances[i])});
  write_csv(t, c.csv);

  json s;
  s["sigma2_hat"] = rep.sigma2_hat;
  s["sigma2_se"] = rep.sigma2_se;
  s["window_requested"] = rep.window_requested;
  s["window_used"] = rep.window_used;
  s["sample_count"] = rep.sample_count;
  s["mean_used"] = rep.mean_used;
  s["mean_exact"] = rep.mean_exact;
  s["n_schedule"] = rep.n_schedule;
  s["ks_statistics"] = rep.ks_statistics;
  s["empirical_variances"] = rep.empirical_variances;
  s["flags"] = rep.flags;
  std::cout << "clt: sigma2_hat = " << rep.sigma2_hat << " (se "
            << rep.sigma2_se << ", window " << rep.window_used
            << "), final ks = "
            << (rep.ks_statistics.empty() ? 0.0 : rep.ks_statistics.back())
            << "\n";
  return s;
}

json run_donsker(const Ctx& c) {
  const Observable f = observable_from_json(c.m, need(c.cmd, "f", "donsker"));
  const auto n = c.cmd.value("n", 4096LL);
  const auto paths = c.cmd.value("paths", std::uint64_t{10000});
  const int grid = c.cmd.value("grid", 17);
  const int window = c.cmd.value("window", 32);
  const auto gk_budget = c.cmd.value("gk_budget", std::uint64_t{65536});

  OrbitEngine eng(c.aut, c.cfg.horizon);
  const DonskerReport rep = donsker_paths(eng, f, n, paths, grid, window,
                                          gk_budget, c.cfg.seed, c.cfg.workers);
  ReportTable t;
  t.columns = {"t", "var"};
  for (size_t i = 0; i < rep.grid.size(); ++i)
    t.add_row({format_num(rep.grid[i]), format_num(rep.variance_at_grid[i])});
  write_csv(t, c.csv);

  json s;
  s["n"] = rep.n;
  s["path_count"] = rep.path_count;
  s["sigma2_hat"] = rep.sigma2_hat;
  s["sigma2_se"] = rep.sigma2_se;
  s["variance_slope"] = rep.variance_slope;
  s["increment_correlation"] = rep.increment_correlation;
  s["mean_used"] = rep.mean_used;
  s["mean_exact"] = rep.mean_exact;
  s["flags"] = rep.flags;
  std::cout << "donsker: variance slope = " << rep.variance_slope
            << ", increment correlation = " << rep.increment_correlation
            << "\n";
  return s;
}

// --- coboundary --------------------------------------------------------

json run_coboundary(const Ctx& c) {
  Observable f =
      c.cmd.contains("psi")
          ? coboundary_make(c.aut,
                            observable_from_json(c.m, c.cmd.at("psi")))
          : observable_from_json(c.m, need(c.cmd, "f", "coboundary"));
  const int window = c.cmd.value("window", 32);
  const auto budget = c.cmd.value("budget", std::uint64_t{65536});
  const std::string scheme_name = c.cmd.value("scheme", std::string("cesaro"));
  CoboundaryScheme scheme = CoboundaryScheme::Cesaro;
  if (scheme_name == "partial")
    scheme = CoboundaryScheme::Partial;
  else if (scheme_name == "cesaro")
    scheme = CoboundaryScheme::Cesaro;
  else if (scheme_name == "abel")
    scheme = CoboundaryScheme::Abel;
  else
    throw ConfigError("coboundary: unknown scheme \"" + scheme_name + "\"");
  const int n = c.cmd.value("n", 200);
  const double abel_r = c.cmd.value("abel_r", 0.95);
  const auto samples = c.cmd.value("samples", std::uint64_t{256});

  OrbitEngine eng(c.aut, c.cfg.horizon);
  const CoboundaryTestReport test =
      coboundary_test(eng, f, window, budget, c.cfg.seed, c.cfg.workers);
  ReportTable t;
  t.columns = {"N", "residual_l2"};
  for (size_t i = 0; i < test.residual_n_ladder.size(); ++i)
    t.add_row({std::to_string(test.residual_n_ladder[i]),
               format_num(test.residual_l2_ladder[i])});
  write_csv(t, c.csv);

  const CoboundaryReport solved = coboundary_solve(
      eng, f, n, scheme, abel_r, samples, c.cfg.seed, c.cfg.workers);

  json s;
  const char* decision = test.decision == CoboundaryDecision::Coboundary
                             ? "coboundary"
                         : test.decision == CoboundaryDecision::NotCoboundary
                             ? "not-coboundary"
                             : "inconclusive";
  s["decision"] = decision;
  s["sigma2_hat"] = test.sigma2_hat;
  s["sigma2_se"] = test.sigma2_se;
  s["window_used"] = test.window_used;
  s["f_sup"] = test.f_sup;
  s["test_flags"] = test.flags;
  s["scheme"] = scheme_name;
  s["n_used"] = solved.n_used;
  s["residual_l2"] = solved.residual_l2;
  s["residual_sup"] = solved.residual_sup;
  s["solve_flags"] = solved.flags;
  std::cout << "coboundary: " << decision
            << " (sigma2_hat = " << test.sigma2_hat << "), " << scheme_name
            << " solve at N = " << solved.n_used
            << ": residual_l2 = " << solved.residual_l2 << "\n";
  return s;
}

// --- diophantine -------------------------------------------------------

json run_diophantine(const Ctx& c) {
  VecD dir = d_list(need(c.cmd, "direction", "diophantine"),
                    "diophantine.direction");
  const double c2 = c.cmd.value("c2", 1.0);
  const auto zmax = c.cmd.value("zmax", 10000LL);
  // c1_hat scales linearly in the direction; normalize so reports are
  // comparable across inputs
  double norm2 = 0.0;
  for (double x : dir) norm2 += x * x;
  if (norm2 > 0.0) {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& x : dir) x *= inv;
  }

  const DiophantineReport rep =
      diophantine_constant(dir, c2, zmax, c.cfg.workers);
  ReportTable t;
  t.columns = {"c2", "zmax", "c1_hat", "witness", "pairing"};
  std::string witness;
  for (size_t i = 0; i < rep.witness_z.size(); ++i) {
    if (i) witness += " ";
    witness += std::to_string(rep.witness_z[i]);
  }
  t.add_row({format_num(rep.c2), std::to_string(rep.zmax),
             format_num(rep.c1_hat), witness, format_num(rep.witness_pairing)});
  write_csv(t, c.csv);

  json s;
  s["direction"] = rep.direction;
  s["c2"] = rep.c2;
  s["zmax"] = rep.zmax;
  s["c1_hat"] = rep.c1_hat;
  s["witness_z"] = rep.witness_z;
  s["witness_pairing"] = rep.witness_pairing;
  s["flags"] = rep.flags;
  std::cout << "diophantine: c1_hat = " << rep.c1_hat << " at z = (" << witness
            << ")\n";
  return s;
}

// validation failures exit 1, runtime failures exit 2
bool is_validation_error(const Error& e) {
  return dynamic_cast<const ConfigError*>(&e) ||
         dynamic_cast<const DimensionMismatch*>(&e) ||
         dynamic_cast<const NonFiniteCoordinate*>(&e) ||
         dynamic_cast<const AntisymmetryViolation*>(&e) ||
         dynamic_cast<const JacobiViolation*>(&e) ||
         dynamic_cast<const NotNilpotent*>(&e) ||
         dynamic_cast<const BasisNotMalcevOrdered*>(&e) ||
         dynamic_cast<const BracketNotPreserved*>(&e) ||
         dynamic_cast<const LatticeNotPreserved*>(&e) ||
         dynamic_cast<const NotUnimodular*>(&e) ||
         dynamic_cast<const NotErgodic*>(&e) ||
         dynamic_cast<const NotCentered*>(&e) ||
         dynamic_cast<const SupportTooLarge*>(&e) ||
         dynamic_cast<const ZeroDirection*>(&e) ||
         dynamic_cast<const SubspaceRational*>(&e) ||
         dynamic_cast<const SearchBoxTooLarge*>(&e);
}

int run_one(const std::string& command, const std::string& config_path,
            const std::optional<std::uint64_t>& seed,
            const std::optional<int>& workers,
            const std::optional<std::string>& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();

  ExperimentConfig cfg;
  try {
    cfg = ExperimentConfig::load(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (seed) cfg.seed = *seed;
  if (workers) cfg.workers = *workers;
  if (out_dir) cfg.out_dir = *out_dir;
  if (cfg.workers < 1) {
    std::cerr << "error: workers must be >= 1\n";
    return 1;
  }

  int exit_code = 0;
  json summary;
  try {
    std::filesystem::create_directories(cfg.out_dir);
    const Nilmanifold m = cfg.make_manifold();
    const Automorphism aut = cfg.make_automorphism(m);
    const json cmd = cfg.commands.value(command, json::object());
    const std::filesystem::path csv =
        std::filesystem::path(cfg.out_dir) /
        (command + "_" + std::to_string(cfg.seed) + ".csv");
    const Ctx ctx{cfg, cmd, m, aut, csv};

    if (command == "check")
      summary = run_check(ctx, exit_code);
    else if (command == "mixing")
      summary = run_mixing(ctx);
    else if (command == "multimix")
      summary = run_multimix(ctx);
    else if (command == "equid")
      summary = run_equid(ctx);
    else if (command == "unstable")
      summary = run_unstable(ctx);
    else if (command == "clt")
      summary = run_clt(ctx);
    else if (command == "donsker")
      summary = run_donsker(ctx);
    else if (command == "coboundary")
      summary = run_coboundary(ctx);
    else if (command == "diophantine")
      summary = run_diophantine(ctx);
    else
      throw ConfigError("unknown command " + command);

    summary["command"] = command;
    summary["config"] = config_path;
    summary["seed"] = cfg.seed;
    summary["workers"] = cfg.workers;
    summary["csv"] = csv.filename().string();
    summary["runtime_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::ofstream out(std::filesystem::path(cfg.out_dir) / "summary.json");
    out << summary.dump(2) << "\n";
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return exit_code;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"decay-rate experiments for nilmanifold automorphisms"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out_dir;

  static const std::pair<const char*, const char*> kCommands[] = {
      {"check", "validate the setup and report spectral structure"},
      {"mixing", "two-point correlation decay along iterates"},
      {"multimix", "joint correlation decay of several observables"},
      {"equid", "box equidistribution rate and the obstruction probe"},
      {"unstable", "averages over expanding unstable boxes"},
      {"clt", "Green-Kubo variance and normality of Birkhoff sums"},
      {"donsker", "rescaled Birkhoff paths and their variance profile"},
      {"coboundary", "cohomological test and transfer-function solve"},
      {"diophantine", "lattice pairing lower bound for a direction"},
  };
  for (const auto& [name, desc] : kCommands) {
    auto* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "JSON experiment file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base RNG seed")->envname("NILMIX_SEED");
    sub->add_option("--workers", workers, "worker thread count")
        ->envname("NILMIX_WORKERS");
    sub->add_option("--out", out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return run_one(command, config_path, seed, workers, out_dir);
}

}  // namespace nilmix
