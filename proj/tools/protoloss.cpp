// protoloss: command-line front end for data generation, training, geometry
// analysis and multi-seed comparison.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "protoloss/error.hpp"
#include "protoloss/experiment.hpp"

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace protoloss;

  CLI::App app{"Prototype-based classification losses and latent geometry"};
  app.require_subcommand(1);

  std::string config_path;
  std::string method;
  std::string out_dir;
  std::string run_dir;
  std::string methods = "CE,CL,DPP,DPNP";
  std::string seeds = "1,2,3";
  std::int64_t seed = -1;

  auto* gen = app.add_subcommand("gen-data", "Generate a Gaussian-blob dataset");
  gen->add_option("--config", config_path, "JSON config")->required();
  gen->add_option("--out", out_dir, "Output directory (overrides config)");

  auto* train = app.add_subcommand("train", "Train one model");
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--method", method, "CE, CL, DPP or DPNP");
  train->add_option("--seed", seed, "Training seed (overrides config)");
  train->add_option("--out", out_dir, "Run directory (overrides config)");

  auto* analyze = app.add_subcommand("analyze", "Latent-geometry report for a run");
  analyze->add_option("--run", run_dir, "Run directory")->required();

  auto* compare = app.add_subcommand("compare", "Method x seed comparison");
  compare->add_option("--config", config_path, "JSON config")->required();
  compare->add_option("--methods", methods, "Comma-separated methods");
  compare->add_option("--seeds", seeds, "Comma-separated seeds");
  compare->add_option("--out", out_dir, "Output directory (overrides config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*analyze) return cmd_analyze(run_dir, std::cerr);

    ExperimentConfig config = load_config(config_path);
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (*gen) return cmd_gen_data(config, std::cerr);
    if (*train) {
      if (!method.empty()) config.train.method = parse_method(method);
      if (seed >= 0) config.train.seed = static_cast<std::uint64_t>(seed);
      return cmd_train(config, std::cerr);
    }
    std::vector<Method> method_list;
    for (const auto& m : split_list(methods)) method_list.push_back(parse_method(m));
    std::vector<std::uint64_t> seed_list;
    for (const auto& s : split_list(seeds)) {
      std::size_t used = 0;
      const long long v = std::stoll(s, &used);
      if (used != s.size() || v < 0) throw ConfigError("invalid seed '" + s + "'");
      seed_list.push_back(static_cast<std::uint64_t>(v));
    }
    return cmd_compare(config, method_list, seed_list, std::cerr);
  } catch (const std::invalid_argument&) {
    std::cerr << "error: seeds must be non-negative integers\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
}
