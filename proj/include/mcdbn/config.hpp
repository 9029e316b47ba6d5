#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcdbn/data.hpp"
#include "mcdbn/training.hpp"

namespace mcdbn {

// Everything a run needs, parsed from one JSON file. Unknown keys are
// rejected at every nesting level so typos fail loudly instead of silently
// falling back to defaults.
struct Config {
  TrainConfig train;        // shape.d_x / d_y stay 0 until data is seen
  SyntheticSpec synth;
  MissingnessSpec missing;
  std::vector<std::string> methods = {"mcdbn", "zero", "mean"};
  std::string x_csv, y_csv, labels_csv;  // empty = use the synthetic source
  std::uint64_t config_hash = 0;         // FNV-1a of the canonical JSON text
};

// FNV-1a 64-bit over the bytes of `text`.
std::uint64_t fnv1a_hash(const std::string& text);

Config parse_config_json(const std::string& text);
Config load_config(const std::string& path);

// Seed precedence: --seed flag beats MCDBN_SEED beats the config value.
// `flag_seed` < 0 means the flag was absent.
void resolve_seed(Config& config, long long flag_seed);

}  // namespace mcdbn
