#include "nilmix/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nilmix/errors.hpp"

namespace nilmix {

namespace {

[[noreturn]] void bad_line(const std::string& path, int line,
                           const std::string& what) {
  throw ConfigError(path + ":" + std::to_string(line) + ": " + what);
}

long long parse_ll(const std::string& path, int line, const std::string& tok,
                   const char* what) {
  try {
    size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    bad_line(path, line, std::string("expected integer ") + what + ", got '" +
                             tok + "'");
  }
}

}  // namespace

NilpotentAlgebra load_algebra(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open algebra file " + path);

  int dim = 0;
  std::optional<int> declared_step;
  struct Entry {
    int i, j, k, line;
    Rat c;
  };
  std::vector<Entry> entries;

  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::string key;
    if (!(ls >> key)) continue;

    if (key == "dim") {
      std::string tok;
      if (!(ls >> tok)) bad_line(path, lineno, "dim needs a value");
      dim = static_cast<int>(parse_ll(path, lineno, tok, "dimension"));
      if (dim < 1) bad_line(path, lineno, "dimension must be positive");
    } else if (key == "step") {
      std::string tok;
      if (!(ls >> tok)) bad_line(path, lineno, "step needs a value");
      declared_step =
          static_cast<int>(parse_ll(path, lineno, tok, "nilpotency step"));
    } else if (key == "bracket") {
      std::string ti, tj, tk, tn, td;
      if (!(ls >> ti >> tj >> tk >> tn >> td))
        bad_line(path, lineno, "bracket needs: i j k num den");
      Entry e;
      e.i = static_cast<int>(parse_ll(path, lineno, ti, "index i"));
      e.j = static_cast<int>(parse_ll(path, lineno, tj, "index j"));
      e.k = static_cast<int>(parse_ll(path, lineno, tk, "index k"));
      const long long num = parse_ll(path, lineno, tn, "numerator");
      const long long den = parse_ll(path, lineno, td, "denominator");
      if (den == 0) bad_line(path, lineno, "zero denominator");
      if (dim == 0) bad_line(path, lineno, "bracket before dim");
      for (int idx : {e.i, e.j, e.k})
        if (idx < 1 || idx > dim)
          bad_line(path, lineno, "index " + std::to_string(idx) +
                                     " outside 1.." + std::to_string(dim));
      e.c = Rat(num, den);
      e.line = lineno;
      entries.push_back(std::move(e));
    } else {
      bad_line(path, lineno, "unknown keyword '" + key + "'");
    }
    std::string extra;
    if (ls >> extra) bad_line(path, lineno, "trailing token '" + extra + "'");
  }
  if (dim == 0) throw ConfigError(path + ": missing dim declaration");

  std::vector<Rat> tensor(static_cast<size_t>(dim) * dim * dim, Rat(0));
  std::vector<int> set_at(tensor.size(), 0);
  auto put = [&](int i, int j, int k, const Rat& c, int line) {
    const size_t idx = (static_cast<size_t>(i) * dim + j) * dim + k;
    if (set_at[idx] && tensor[idx] != c)
      bad_line(path, line,
               "bracket [" + std::to_string(i + 1) + "," +
                   std::to_string(j + 1) + "] component " +
                   std::to_string(k + 1) + " already set to " +
                   to_string(tensor[idx]) + " at line " +
                   std::to_string(set_at[idx]));
    tensor[idx] = c;
    set_at[idx] = line;
  };
  for (const auto& e : entries) {
    put(e.i - 1, e.j - 1, e.k - 1, e.c, e.line);
    put(e.j - 1, e.i - 1, e.k - 1, -e.c, e.line);
  }
  return NilpotentAlgebra::validate(dim, tensor, declared_step);
}

namespace {

Rat rat_from_json(const nlohmann::json& v, const std::string& where) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() ||
      !v[1].is_number_integer())
    throw ConfigError(where + ": rationals are [num, den] integer pairs");
  const auto den = v[1].get<long long>();
  if (den == 0) throw ConfigError(where + ": zero denominator");
  return Rat(v[0].get<long long>(), den);
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }

  ExperimentConfig cfg;
  cfg.config_path = path;
  try {
    if (!j.contains("algebra"))
      throw ConfigError("missing \"algebra\" (path to the algebra file)");
    const auto rel = j.at("algebra").get<std::string>();
    std::filesystem::path p(rel);
    if (p.is_relative())
      p = std::filesystem::path(path).parent_path() / p;
    cfg.algebra_path = p.string();

    cfg.metric_scale = j.value("metric_scale", 1.0);
    if (!(cfg.metric_scale > 0.0))
      throw ConfigError("metric_scale must be positive");

    if (!j.contains("automorphism"))
      throw ConfigError("missing \"automorphism\" matrix");
    const auto& cols = j.at("automorphism");
    if (!cols.is_array() || cols.empty())
      throw ConfigError("automorphism must be a nonempty array of columns");
    const int d = static_cast<int>(cols.size());
    cfg.d_alpha = RatMat(d, d);
    for (int c = 0; c < d; ++c) {
      if (!cols[c].is_array() || static_cast<int>(cols[c].size()) != d)
        throw ConfigError("automorphism column " + std::to_string(c + 1) +
                          " must list " + std::to_string(d) + " entries");
      for (int r = 0; r < d; ++r)
        cfg.d_alpha.at(r, c) =
            rat_from_json(cols[c][r], "automorphism[" + std::to_string(c + 1) +
                                          "][" + std::to_string(r + 1) + "]");
    }

    cfg.horizon = j.value("horizon", static_cast<long long>(1 << 13));
    if (cfg.horizon < 1) throw ConfigError("horizon must be positive");
    cfg.seed = j.value("seed", std::uint64_t{1});
    cfg.workers = j.value("workers", 1);
    if (cfg.workers < 1) throw ConfigError("workers must be >= 1");
    cfg.out_dir = j.value("out", std::string("out"));
    cfg.commands = j.value("commands", nlohmann::json::object());
    if (!cfg.commands.is_object())
      throw ConfigError("\"commands\" must be an object");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return cfg;
}

Nilmanifold ExperimentConfig::make_manifold() const {
  return Nilmanifold(load_algebra(algebra_path), metric_scale);
}

Automorphism ExperimentConfig::make_automorphism(const Nilmanifold& m) const {
  return Automorphism::validate(m, d_alpha);
}

Observable observable_from_json(const Nilmanifold& m,
                                const nlohmann::json& spec) {
  try {
    const auto kind = spec.at("kind").get<std::string>();
    if (kind == "character") {
      const auto freq = spec.at("freq").get<std::vector<long long>>();
      const auto phase_s = spec.value("phase", std::string("cos"));
      Phase phase;
      if (phase_s == "cos")
        phase = Phase::Cos;
      else if (phase_s == "sin")
        phase = Phase::Sin;
      else
        throw ConfigError("phase must be \"cos\" or \"sin\"");
      return Observable::character(m, freq, phase, spec.value("theta", 1.0));
    }
    if (kind == "bump") {
      Point center;
      center.t = spec.at("center").get<std::vector<double>>();
      if (static_cast<int>(center.t.size()) != m.dim())
        throw ConfigError("bump center has wrong dimension");
      return Observable::bump(m, center, spec.at("radius").get<double>(),
                              spec.value("degree", 3),
                              spec.value("theta", 1.0));
    }
    if (kind == "constant")
      return Observable::constant(m, spec.at("value").get<double>());
    throw ConfigError("unknown observable kind \"" + kind + "\"");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("observable: ") + e.what());
  }
}

}  // namespace nilmix
