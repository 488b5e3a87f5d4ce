// qsep: simulate, asymptote and validate subcommands.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "qsep/commands.hpp"
#include "qsep/errors.hpp"

namespace {

unsigned default_workers() {
  if (const char *env = std::getenv("QSEP_WORKERS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1)
        return static_cast<unsigned>(v);
    } catch (const std::exception &) {
    }
    std::cerr << "qsep: ignoring invalid QSEP_WORKERS='" << env << "'\n";
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void add_common(CLI::App *cmd, qsep::CommandOptions &o, std::uint64_t &seed) {
  cmd->add_option("--config", o.config_path, "Experiment config file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out-dir", o.out_dir, "Directory for outputs")->capture_default_str();
  cmd->add_option("--workers", o.workers, "Worker threads (default: $QSEP_WORKERS or cores)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--seed", seed, "Override the config seed");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Phase-quantized SIMO SEP simulator"};
  app.require_subcommand(1);

  qsep::CommandOptions opts;
  opts.workers = default_workers();
  std::uint64_t seed = 0;
  double k = 2.0;

  auto *simulate = app.add_subcommand("simulate", "Monte Carlo SEP sweep -> points.csv");
  add_common(simulate, opts, seed);
  auto *asymptote = app.add_subcommand("asymptote", "High-SNR asymptote -> asymptote.csv");
  add_common(asymptote, opts, seed);
  asymptote->add_option("--k", k, "Scaling factor in [1, 2] (default: config, else 2)");
  auto *validate = app.add_subcommand("validate", "Statistical validation battery");
  add_common(validate, opts, seed);

  CLI11_PARSE(app, argc, argv);

  for (auto *cmd : {simulate, asymptote, validate})
    if (cmd->parsed() && cmd->count("--seed"))
      opts.seed = seed;
  if (asymptote->parsed() && asymptote->count("--k"))
    opts.k = k;

  try {
    if (simulate->parsed())
      return qsep::cmd_simulate(opts, std::cerr);
    if (asymptote->parsed())
      return qsep::cmd_asymptote(opts, std::cerr);
    return qsep::cmd_validate(opts, std::cerr);
  } catch (const qsep::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qsep::IoError &e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 3;
  } catch (const qsep::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}
