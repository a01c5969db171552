#pragma once

#include "kickns_app/config.hpp"
#include "kickns_app/report.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace kickns::app {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    /// oracle-validate found a comparison outside its tolerance
    exit_check_failed = 1,
    exit_config = 2,
    exit_runtime = 3,
};

const std::vector<std::string>& subcommands();

/// Runs one subcommand, writing artifacts through the report. Returns
/// exit_ok or exit_check_failed; module failures propagate as exceptions.
int run_command(const std::string& name, const ExperimentConfig& config, Report& report, std::ostream& log);

/// Full command line: `kickns <subcommand> --config <path> [--seed N]
/// [--threads N] [--out DIR]`. Artifacts go to <out>/<subcommand>/, where
/// out is --out, else $KICKNS_OUT, else the config's output_dir.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kickns::app
