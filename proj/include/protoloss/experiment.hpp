#pragma once

// Experiment orchestration behind the `protoloss` command-line tool: JSON
// config parsing, the four subcommands, and the run-directory artifacts.
//
// Exit codes: 0 success, 2 config/validation, 3 I/O, 4 numerical failure.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "protoloss/data.hpp"
#include "protoloss/trainer.hpp"

namespace protoloss {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNumerical = 4;

struct DataSection {
  std::optional<BlobConfig> generator;
  std::filesystem::path train_csv;
  std::filesystem::path test_csv;  // optional
  std::size_t classes = 0;
  bool rescale = false;
};

struct ModelSection {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t latent_dim = 3;
};

struct ExperimentConfig {
  DataSection data;
  ModelSection model;
  TrainConfig train;
  std::filesystem::path output_dir = "run";

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Fields missing from the JSON keep their defaults. Unknown fields are
// rejected so typos do not silently fall back to defaults.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

// Sub-seeds for independent random streams of one run, all derived from
// train.seed (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Loads or generates the train/test pair described by the data section.
TrainTestSplit load_data(const DataSection& data);

// Git-style SHA-1 ("blob <len>\0" + content) of the given text.
std::string content_hash(const std::string& text);

int exit_code_for(const std::exception& error);

int cmd_gen_data(const ExperimentConfig& config, std::ostream& log);
int cmd_train(const ExperimentConfig& config, std::ostream& log);
int cmd_analyze(const std::filesystem::path& run_dir, std::ostream& log);
int cmd_compare(const ExperimentConfig& config,
                const std::vector<Method>& methods,
                const std::vector<std::uint64_t>& seeds, std::ostream& log);

// One row of comparison.csv.
struct ComparisonRow {
  Method method = Method::kDPNP;
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  double min_sep = 0.0;
  double mean_sep = 0.0;
  double std_sep = 0.0;
  double scr = 0.0;
};

std::vector<ComparisonRow> load_comparison_csv(
    const std::filesystem::path& path);

}  // namespace protoloss
