#include "common.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include "mmtlab/error.hpp"

namespace mmtlab::cli {

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << contents;
  out.flush();
  if (!out) throw Error(Errc::io, "write failed: " + path.string());
}

void write_manifest(const Context& ctx, const std::filesystem::path& primary, const std::string& subcommand,
                    const json& config, std::uint64_t seed, const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs) {
  const json manifest = {{"subcommand", subcommand},
                         {"config", config},
                         {"seed", seed},
                         {"inputs", inputs},
                         {"outputs", outputs},
                         {"version", MMTLAB_VERSION_STRING},
                         {"started_utc", ctx.started_utc}};
  write_text(primary.string() + ".manifest.json", manifest.dump(2) + "\n");
}

}  // namespace mmtlab::cli
