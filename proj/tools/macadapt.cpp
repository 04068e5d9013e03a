// Batch front-end: macadapt <command> <config.json> [--nats] [--tol x] [--seed n] [--out-dir d]
#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "macadapt/cli.hpp"

int main(int argc, char** argv) {
  using namespace macadapt;
  CLI::App app{"Outage-free rate and power adaptation for fading multiple-access channels"};
  app.require_subcommand(1);

  std::string config;
  io::Overrides ov;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool nats = false;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"sumrate", "weighted adaptive sum-capacity and its rate law"},
      {"region", "capacity-region boundary by weighted-sum sweep"},
      {"region-partial", "region boundary with quantized cross-channel knowledge"},
      {"power-opt", "optimal power control, power-adaptive region and budget sweep"},
      {"verify", "outage check of a constructed or imported rate law"},
      {"simulate", "block-fading simulation of a rate law"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("config", config, "JSON run configuration")->required();
    sub->add_flag("--nats", nats, "report rates in nats");
    sub->add_option("--tol", tol, "verification tolerance");
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out-dir", out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kInvalidConfig;
  }
  ov.nats = nats;
  ov.tol = tol;
  ov.seed = seed;
  ov.out_dir = out_dir;
  return cli::run(app.get_subcommands().front()->get_name(), config, ov);
}
