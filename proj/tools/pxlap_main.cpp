#include <iostream>

#include "CLI11.hpp"
#include "pxlap/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Variable-exponent p-Laplacian toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  for (const std::string& name : pxl::commands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "seed for randomized steps");
    sub->add_option("--out", out_dir, "output directory");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pxl::kExitConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  pxl::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = pxl::load_config(config_path);
  } catch (const pxl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pxl::kExitConfigError;
  }
  if (seed) cfg.seed = seed;
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  return pxl::run(command, cfg, std::cerr);
}
