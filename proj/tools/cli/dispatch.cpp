#include "dispatch.hpp"

#include <ostream>

#include "common.hpp"
#include "mmtlab/error.hpp"
#include "mmtlab/features.hpp"

namespace mmtlab::cli {
namespace {

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r' || c == '\t') c = ' ';
  return s;
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& message) {
  err << "error\t" << kind << '\t' << one_line(message) << std::endl;
  return code;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise, metrics, fusion checks, probing and annotation for multimodal MT experiments", "mmtlab"};
  app.require_subcommand(1);
  app.set_version_flag("--version",
                       std::string("mmtlab ") + MMTLAB_VERSION_STRING + " (feature format " +
                           std::to_string(corpus::kFeatureFormatVersion) + ")");

  std::vector<Command> commands = {add_noise(app), add_evaluate(app), add_fuse_check(app), add_serve(app),
                                   add_tune_noise(app), add_create_batch(app)};
  for (auto& c : add_probe(app)) commands.push_back(std::move(c));
  for (auto& c : add_report(app)) commands.push_back(std::move(c));

  Context ctx{out, err, utc_now()};
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(err, kUsage, "usage", e.what());
  }

  try {
    for (auto& c : commands) {
      if (c.app->parsed()) return c.run(ctx);
    }
    return fail(err, kUsage, "usage", "no subcommand selected");
  } catch (const UsageError& e) {
    return fail(err, kUsage, "usage", e.what());
  } catch (const Error& e) {
    const int code = e.code() == Errc::invalid_argument ? kUsage : kData;
    return fail(err, code, errc_name(e.code()), e.what());
  } catch (const std::exception& e) {
    return fail(err, kInternal, "internal", e.what());
  }
}

}  // namespace mmtlab::cli
