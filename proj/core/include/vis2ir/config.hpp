#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vis2ir/data.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/superres.hpp"
#include "vis2ir/synthetic.hpp"
#include "vis2ir/training.hpp"

namespace vis2ir::config {

struct DataConfig {
  std::filesystem::path manifest;  // empty: train on synthetic pairs
  int synthetic_count = 8;
  data::Direction direction = data::Direction::visible_to_infrared;  // synthetic data only
};

struct SuperresConfig {
  superres::SrSpec spec;
  superres::SrTrainConfig train;
  std::filesystem::path checkpoint;  // used by translate/export when set
};

struct OutputConfig {
  std::filesystem::path dir = "runs/default";
};

/// Every knob of a run. Defaults are the values in the member initialisers; the INI text
/// produced by `to_ini(RunConfig{})` lists them all.
struct RunConfig {
  model::GeneratorSpec generator;
  model::DiscriminatorSpec discriminator;
  training::TrainConfig train;
  DataConfig data;
  data::SynthesisRecipe synthetic;
  SuperresConfig superres;
  OutputConfig output;

  /// Derives dependent fields (discriminator input channels, SR channels and range) and
  /// validates every section.
  void finalize();
};

/// Parses `[section]` headers and `key = value` lines; `#` and `;` start comment lines.
/// Unknown sections or keys and malformed values raise ConfigError naming the key and line.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
/// Relative paths inside the file resolve against its directory.
RunConfig load_run_config(const std::filesystem::path& file);

std::string to_ini(const RunConfig& config);

}  // namespace vis2ir::config
