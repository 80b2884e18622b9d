#include <iostream>
#include <string_view>
#include <utility>

#include "CLI11.hpp"
#include "kdlab/cli_report.hpp"

int main(int argc, char** argv) {
  CLI::App app{"kdlab: Markowitz-distilled DDPG portfolio laboratory"};
  app.require_subcommand(1, 1);

  kdlab::cli::Options opts;
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  const std::pair<const char*, const char*> commands[] = {
      {"ingest", "clean the price CSV and write panel.csv"},
      {"frontier", "efficient frontier on the training split"},
      {"distill", "build the Markowitz teacher dataset and pretrain the actor"},
      {"train", "DDPG training from the distilled actor"},
      {"backtest", "run every strategy over the trading split"},
      {"report", "metric table and charts"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "run configuration (key = value)")->required();
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "output directory");
    if (std::string_view(name) == "train")
      sub->add_flag("--no-distill", opts.no_distill, "train plain DDPG from a fresh actor");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  opts.config = config;
  if (sub->count("--seed") > 0) opts.seed = seed;
  if (sub->count("--out") > 0) opts.out = out;
  return kdlab::cli::run_command(sub->get_name(), opts, std::cout, std::cerr);
}
