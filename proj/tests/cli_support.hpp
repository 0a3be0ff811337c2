#pragma once

// Runs the sprout binary and captures what it printed.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "support.hpp"

namespace sprout::testing {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("sprout_" + name);
    std::filesystem::create_directories(dir);
    return dir;
}

inline CliResult run_cli(const std::string& args, const std::filesystem::path& dir) {
    const auto out = dir / "stdout.txt";
    const auto err = dir / "stderr.txt";
    const std::string command =
        std::string(SPROUT_CLI) + " " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
    const int status = std::system(command.c_str());
    CliResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = read_text(out.string());
    result.err = read_text(err.string());
    return result;
}

inline std::string generate_args(const std::filesystem::path& out) {
    return "generate --source " + repo_path("fixtures/two_sum.py") + " --lang python --mock " +
           repo_path("fixtures/script.json") + " --seed 7 --out '" + out.string() + "'";
}

}  // namespace sprout::testing
