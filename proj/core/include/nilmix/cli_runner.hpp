#pragma once

namespace nilmix {

// Full command-line driver: parse, dispatch, write CSV/JSON artifacts.
// Returns the process exit code: 0 success, 1 validation failure (bad
// config, invalid algebraic data, non-ergodic automorphism where ergodicity
// is required), 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace nilmix
