#pragma once

// Run configuration: defaults, then evolvex.json (or the file named by
// EVOLVEX_CONFIG), then command-line flags.

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "evolvex/graphgen.hpp"
#include "evolvex/model.hpp"
#include "evolvex/promptgen.hpp"
#include "evolvex/train.hpp"

namespace evolvex {

inline constexpr const char* kConfigFileName = "evolvex.json";
inline constexpr const char* kConfigEnvVar = "EVOLVEX_CONFIG";

struct RunConfig {
  GeneratorConfig generator;
  std::uint64_t data_seed = 0;
  int horizon = 4;
  ModelConfig model;
  TrainConfig train;
  ProviderConfig llm;
  std::uint64_t eval_seed = 0;
  std::string output_dir = ".";

  void validate() const;
};

// Overlays `doc` onto `config`. Unknown keys and wrongly typed values raise
// ConfigError naming the key.
void apply_config(RunConfig& config, const nlohmann::json& doc);
nlohmann::json run_config_to_json(const RunConfig& config);

// EVOLVEX_CONFIG if set (the file must exist), else ./evolvex.json if present.
std::optional<std::string> config_path();
RunConfig load_run_config();

}  // namespace evolvex
