// Command-line front end for the experiment runner.

#include "bergorb/expcli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

int main(int argc, char **argv)
{
  namespace cli = bergorb::cli;
  CLI::App app{"Bergman density experiments on orbifold spheres"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cli::kToolVersion);

  std::string config_path;
  std::string out_dir = ".";
  unsigned precision = 0;
  unsigned threads = 1;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Experiment config (JSON)");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  auto *precision_opt =
      app.add_option("--precision", precision, "Working precision in bits (64 = long double)");
  app.add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  auto *seed_opt = app.add_option("--seed", seed, "Seed for grid jitter and random points");

  std::vector<CLI::App *> runs;
  for (const auto &[kind, name] : cli::kind_names()) {
    auto *sub = app.add_subcommand(name, "Run the " + name + " experiment");
    sub->fallthrough();
    runs.push_back(sub);
  }
  auto *list = app.add_subcommand("list-models", "List model families and their parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    std::cout << cli::list_models_verbose();
    return 0;
  }

  cli::RunOptions opts;
  opts.out_dir = out_dir;
  opts.threads = threads;
  if (precision_opt->count() > 0)
    opts.precision = precision;
  if (seed_opt->count() > 0)
    opts.seed = seed;

  for (const auto &[kind, name] : cli::kind_names()) {
    if (!app.got_subcommand(name))
      continue;
    nlohmann::json raw;
    try {
      if (config_path.empty())
        throw bergorb::ConfigInvalid("--config is required for " + name);
      raw = cli::load_config(config_path);
      if (!raw.is_object())
        throw bergorb::ConfigInvalid("config must be a JSON object");
      if (!raw.contains("kind"))
        raw["kind"] = name;
      else if (raw.at("kind") != name)
        throw bergorb::ConfigInvalid("config kind " + raw.at("kind").dump() + " does not match subcommand " + name);
    } catch (const std::exception &e) {
      std::cerr << "error: " << e.what() << "\n";
      return 2;
    }
    return cli::run_and_report(raw, opts, std::cout, std::cerr);
  }
  return 2;
}
