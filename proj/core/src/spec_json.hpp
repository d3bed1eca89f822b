#pragma once

// JSON mappings for the spec structs stored in checkpoint manifests.

#include <nlohmann/json.hpp>
#include <set>
#include <string>

#include "vis2ir/error.hpp"
#include "vis2ir/model.hpp"

namespace vis2ir::detail {

using Json = nlohmann::ordered_json;

/// Rejects keys outside `allowed` so stale or hand-edited manifests fail loudly.
inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw IntegrityError(std::string(what) + ": unexpected key '" + key + "'");
  }
}

inline Json range_json(const ValueRange& r) { return Json::array({r.lo, r.hi}); }
inline ValueRange range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

inline Json to_json(const model::GeneratorSpec& s) {
  return {{"input_channels", s.input_channels}, {"output_channels", s.output_channels},
          {"base_width", s.base_width},         {"g1_downsamples", s.g1_downsamples},
          {"g1_res_blocks", s.g1_res_blocks},   {"g2_res_blocks", s.g2_res_blocks},
          {"enhancer_count", s.enhancer_count}, {"value_range", range_json(s.value_range)}};
}

inline model::GeneratorSpec generator_spec_from(const nlohmann::json& j) {
  require_keys(j,
               {"input_channels", "output_channels", "base_width", "g1_downsamples", "g1_res_blocks", "g2_res_blocks",
                "enhancer_count", "value_range"},
               "generator spec");
  model::GeneratorSpec s;
  s.input_channels = j.at("input_channels").get<int>();
  s.output_channels = j.at("output_channels").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.g1_downsamples = j.at("g1_downsamples").get<int>();
  s.g1_res_blocks = j.at("g1_res_blocks").get<int>();
  s.g2_res_blocks = j.at("g2_res_blocks").get<int>();
  s.enhancer_count = j.at("enhancer_count").get<int>();
  s.value_range = range_from(j.at("value_range"));
  return s;
}

inline Json to_json(const model::DiscriminatorSpec& s) {
  return {{"n_scales", s.n_scales},
          {"conv_layers", s.conv_layers},
          {"base_width", s.base_width},
          {"input_channels", s.input_channels}};
}

inline model::DiscriminatorSpec discriminator_spec_from(const nlohmann::json& j) {
  require_keys(j, {"n_scales", "conv_layers", "base_width", "input_channels"}, "discriminator spec");
  model::DiscriminatorSpec s;
  s.n_scales = j.at("n_scales").get<int>();
  s.conv_layers = j.at("conv_layers").get<int>();
  s.base_width = j.at("base_width").get<int>();
  s.input_channels = j.at("input_channels").get<int>();
  return s;
}

}  // namespace vis2ir::detail
