#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qsr/config.hpp"
#include "qsr/suite.hpp"

namespace {

struct SharedOptions {
  std::string config_path;
  std::uint64_t seed = 1;
  int workers = 0;
  std::string out_dir;
};

void add_shared_options(CLI::App* sub, SharedOptions& opts) {
  sub->add_option("--config", opts.config_path, "JSON run configuration (see README for the schema)");
  sub->add_option("--seed", opts.seed, "master seed (overrides the config)");
  sub->add_option("--workers", opts.workers, "worker threads, 0 = hardware concurrency");
  sub->add_option("--out", opts.out_dir, "output directory (overrides the config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qsr: stochastic quantum state reduction models, their noise-averaged master "
               "equation, and the statistical verification suite"};
  app.set_version_flag("--version", qsr::kVersion);
  app.require_subcommand(1);

  SharedOptions opts;
  for (const char* name :
       {"trajectory", "ensemble", "master", "noise-validate", "homogenize", "born-suite"}) {
    add_shared_options(app.add_subcommand(name), opts);
  }
  app.get_subcommand("trajectory")->description("integrate one trajectory and dump its time series");
  app.get_subcommand("ensemble")->description("run a trajectory ensemble with Born/martingale checks");
  app.get_subcommand("master")->description("integrate the dephasing master equation");
  app.get_subcommand("noise-validate")->description("noise-process statistics against analytic laws");
  app.get_subcommand("homogenize")->description("colored-noise tau sweep against the white-noise law");
  app.get_subcommand("born-suite")->description("run the full verification suite");

  CLI11_PARSE(app, argc, argv);
  CLI::App* sub = app.get_subcommands().front();

  try {
    std::string text = "{}";
    if (!opts.config_path.empty()) {
      std::ifstream in(opts.config_path);
      if (!in) {
        throw qsr::Error(qsr::ErrorCode::io_failure, "cannot read config " + opts.config_path);
      }
      std::ostringstream buffer;
      buffer << in.rdbuf();
      text = buffer.str();
    }
    qsr::RunConfig config = qsr::parse_config(text, sub->get_name());
    if (sub->count("--seed")) config.master_seed = opts.seed;
    if (sub->count("--workers")) config.workers = opts.workers;
    if (sub->count("--out")) config.out_dir = opts.out_dir;
    return qsr::execute(config, std::cout);
  } catch (const qsr::Error& e) {
    const nlohmann::json error = {{"error",
                                   {{"code", static_cast<int>(e.code())},
                                    {"name", qsr::error_code_name(e.code())},
                                    {"message", e.what()}}}};
    std::cout << error.dump() << "\n";
    return static_cast<int>(e.code());
  }
}
