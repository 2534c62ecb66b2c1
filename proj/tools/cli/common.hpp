#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace mmtlab::cli {

using nlohmann::json;

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string started_utc;
};

/// A parsed subcommand; `run` is called when it was selected.
struct Command {
  CLI::App* app = nullptr;
  std::function<int(Context&)> run;
};

/// Thrown for flag combinations CLI11 cannot express; exits with kUsage.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string utc_now();
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& contents);

/// Writes `<primary>.manifest.json` describing the run.
void write_manifest(const Context& ctx, const std::filesystem::path& primary, const std::string& subcommand,
                    const json& config, std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs);

Command add_noise(CLI::App& app);
Command add_evaluate(CLI::App& app);
Command add_fuse_check(CLI::App& app);
std::vector<Command> add_probe(CLI::App& app);
Command add_serve(CLI::App& app);
Command add_tune_noise(CLI::App& app);
Command add_create_batch(CLI::App& app);
std::vector<Command> add_report(CLI::App& app);

}  // namespace mmtlab::cli
