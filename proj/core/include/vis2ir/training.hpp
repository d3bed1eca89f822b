#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vis2ir/data.hpp"
#include "vis2ir/losses.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/optimizer.hpp"

namespace vis2ir::training {

enum class Stage { global_only, joint };
std::string to_string(Stage s);

struct TrainConfig {
  std::int64_t stage1_steps = 400;
  std::int64_t joint_steps = 400;
  int batch_size = 8;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.5;
  double beta2 = 0.999;
  losses::LossWeights weights;
  std::uint64_t seed = 1;
  int train_height = 32;
  int train_width = 64;
  std::int64_t snapshot_every = 0;  // 0: no intermediate snapshots
  bool flip = true;

  void validate() const;
  std::int64_t total_steps() const { return stage1_steps + joint_steps; }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Everything needed to continue training. Sample order and flips are pure functions of
/// (seed, step), so `step` is the whole random state.
struct TrainState {
  model::GeneratorSpec generator_spec;
  model::DiscriminatorSpec discriminator_spec;
  TrainConfig config;
  model::Generator generator;
  model::DiscriminatorBank discriminators;
  Optimizer opt_g;
  Optimizer opt_d;
  std::int64_t step = 0;

  /// Generator seeded with config.seed, discriminators with a derived seed.
  static TrainState initialize(const model::GeneratorSpec& g, const model::DiscriminatorSpec& d,
                               const TrainConfig& config);
  Stage stage() const { return step < config.stage1_steps ? Stage::global_only : Stage::joint; }
};

/// Source/target batch tensors at the resolution of the current stage.
struct Batch {
  Tensor source;
  Tensor target;
};

/// Indices of the samples drawn at `step`: an epoch-wise permutation seeded by (seed, epoch).
std::vector<std::size_t> batch_indices(const TrainConfig& config, std::size_t dataset_size, std::int64_t step);
/// Per-sample horizontal-flip decisions at `step` (p = 0.5 each when config.flip).
std::vector<bool> batch_flips(const TrainConfig& config, int batch_size, std::int64_t step);

/// Stacks the samples' source/target images, applying flips to both modalities.
Batch make_batch(const std::vector<const data::PairedSample*>& samples, const std::vector<bool>& flips);

/// Validated inputs of one step plus the generator output shared by both sub-steps.
struct StepContext {
  Var source;
  Var target;
  Var fake;
};

StepContext prepare_step(const TrainState& state, const Batch& batch);
/// D update on (real, detached fake). Touches only discriminator parameters.
void discriminator_step(TrainState& state, const StepContext& ctx, losses::LossReport& report);
/// G update on gan_g + lambda * fm with the current D. Touches only generator parameters.
void generator_step(TrainState& state, const StepContext& ctx, losses::LossReport& report);

/// One discriminator update on (real, detached fake) followed by one generator update on
/// gan_g + lambda * fm. Inputs must already be at the stage resolution. Throws
/// NonFiniteLossError before applying an update whose loss is NaN/Inf.
losses::LossReport train_step(TrainState& state, const Batch& batch);

struct StepRecord {
  std::int64_t step = 0;  // 1-based index of the completed step
  Stage stage = Stage::global_only;
  losses::LossReport report;
  double wall_ms = 0.0;
};

std::string to_json_line(const StepRecord& r);

struct ScheduleOptions {
  std::ostream* log = nullptr;                        // JSON lines, one per step
  std::optional<std::filesystem::path> snapshot_dir;  // snapshots/step_<n>.ckpt
  std::optional<std::int64_t> stop_at;                // halt once step reaches this value
  std::function<void(const StepRecord&, const TrainState&)> on_step;
};

/// Runs the remaining steps of the schedule: stage 1 trains G1 alone on half-resolution
/// images, then the full generator trains at config resolution.
void run_schedule(TrainState& state, const data::Dataset& dataset, const ScheduleOptions& options = {});

/// Downsampled copies (ops::downsample2) of every sample, used for stage 1.
data::Dataset half_resolution(const data::Dataset& dataset);

void save_checkpoint(const std::filesystem::path& file, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& file);

}  // namespace vis2ir::training
