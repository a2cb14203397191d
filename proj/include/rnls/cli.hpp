#pragma once

#include <string>
#include <vector>

#include "rnls/config.hpp"

namespace rnls {

/// Runs one subcommand against a resolved config. Returns 0 on pass, 1 on
/// a failed verdict; errors propagate as exceptions. Reports and the run
/// manifest are written into out_dir.
int dispatch(const std::string& subcommand, const Config& config,
             const std::string& out_dir, int threads);

/// Full command-line entry point (argument parsing, error mapping).
/// Exit codes: 0 pass, 1 verdict failure, 2 error.
int run_cli(const std::vector<std::string>& args);

}  // namespace rnls
