#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "nilmix/manifold.hpp"
#include "nilmix/observables.hpp"
#include "nilmix/spectral.hpp"

namespace nilmix {

// Text format, one declaration per line, '#' starts a comment:
//   dim N
//   step S            (optional; checked against the computed step)
//   bracket i j k num den
// declares [e_i, e_j] = (num/den) e_k with 1-based indices. The reversed
// bracket is filled in by antisymmetry; restating it with an inconsistent
// value is an error. All diagnostics carry file:line.
NilpotentAlgebra load_algebra(const std::string& path);

// JSON experiment description. Algebraic data (the automorphism matrix) is
// given as nested [num, den] pairs, column j listing the image of e_j;
// floats are allowed only in runtime parameters. Command-specific sections
// are kept verbatim for the driver.
struct ExperimentConfig {
  std::string config_path;
  std::string algebra_path;  // resolved relative to the config file
  double metric_scale = 1.0;
  RatMat d_alpha;
  long long horizon = 1 << 13;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out_dir = "out";
  nlohmann::json commands;  // per-command parameter objects

  static ExperimentConfig load(const std::string& path);

  Nilmanifold make_manifold() const;
  Automorphism make_automorphism(const Nilmanifold& m) const;
};

// spec: {"kind": "character", "freq": [..], "phase": "cos"|"sin"}
//       {"kind": "bump", "center": [..], "radius": r, "degree": k}
//       {"kind": "constant", "value": v}
// optional "theta" on character/bump.
Observable observable_from_json(const Nilmanifold& m,
                                const nlohmann::json& spec);

}  // namespace nilmix
