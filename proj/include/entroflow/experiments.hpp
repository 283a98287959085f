#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "entroflow/config.hpp"

namespace entroflow {

enum class ExitCode : int { success = 0, config_error = 2, numeric_error = 3, check_failed = 4 };

struct Check {
    std::string module;
    std::string name;
    bool pass = false;
    double value = 0.0;
    double limit = 0.0;
};

/// What a subcommand produced: pass/fail checks, data files written into the
/// output directory (relative names) and free-form notes for the manifest.
struct CommandOutcome {
    std::vector<Check> checks;
    std::vector<std::string> files;
    nlohmann::ordered_json notes = nlohmann::ordered_json::object();
    std::vector<std::string> summary;

    bool pass() const;
};

CommandOutcome cmd_forward(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_reverse(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_verify_control(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_entropy_report(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_iterate(const ExperimentConfig& config, const std::filesystem::path& out);
CommandOutcome cmd_ergodic(const ExperimentConfig& config, const std::filesystem::path& out);

const std::vector<std::string>& subcommand_names();

struct RunRequest {
    std::string command;
    std::filesystem::path config_path;  ///< empty: all defaults
    std::optional<std::uint64_t> seed;
    int threads = 0;
    std::optional<std::filesystem::path> out;
};

/// Loads the config, resolves the output directory (--out, then the config's
/// output.directory, then ENTROFLOW_OUT, then ./entroflow-out), runs the
/// subcommand and writes manifest.json. Returns the process exit code.
int run_subcommand(const RunRequest& request, std::ostream& log, std::ostream& err);

std::string version_string();

}  // namespace entroflow
