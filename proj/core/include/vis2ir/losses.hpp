#pragma once

#include <span>
#include <string>
#include <vector>

#include "vis2ir/model.hpp"

namespace vis2ir::losses {

/// log_likelihood: binary cross-entropy on logits (non-saturating generator term).
/// least_squares: squared distance to targets 1 (real) and 0 (fake).
enum class GanMode { log_likelihood, least_squares };

GanMode parse_gan_mode(const std::string& s);
std::string to_string(GanMode m);

struct LossWeights {
  double lambda_fm = 10.0;
  GanMode gan_mode = GanMode::least_squares;

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct ScaleComponents {
  double gan_g = 0.0;
  double gan_d = 0.0;
  double fm = 0.0;
  friend bool operator==(const ScaleComponents&, const ScaleComponents&) = default;
};

struct LossReport {
  double gan_g = 0.0;
  double gan_d = 0.0;
  double fm = 0.0;
  double total_g = 0.0;
  std::vector<ScaleComponents> per_scale;

  /// total_g == gan_g + lambda_fm * fm within `tol`, and fm >= 0.
  bool consistent(const LossWeights& w, double tol = 1e-9) const;
  bool finite() const;
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

// Single-scale terms. Patch aggregation is the mean over patches and batch.

Var gan_loss_d_scale(const model::ScoreMap& real, const model::ScoreMap& fake, GanMode mode);
Var gan_loss_g_scale(const model::ScoreMap& fake, GanMode mode);
/// sum_i (1 / N_i) * ||real_i - fake_i||_1, batch-averaged. The real branch is detached.
Var feature_matching_scale(const model::FeatureStack& real, const model::FeatureStack& fake);

// Multi-scale objectives: sums of the single-scale terms over the discriminator bank.

Var gan_loss_d(std::span<const model::ScoreMap> real, std::span<const model::ScoreMap> fake, GanMode mode);
Var gan_loss_g(std::span<const model::ScoreMap> fake, GanMode mode);
Var feature_matching_loss(std::span<const model::FeatureStack> real, std::span<const model::FeatureStack> fake);

double total_generator_objective(double gan_g, double fm, const LossWeights& w);
Var total_generator_objective(const Var& gan_g, const Var& fm, const LossWeights& w);

std::vector<model::ScoreMap> scores_of(const std::vector<model::DiscriminatorOutput>& outputs);
std::vector<model::FeatureStack> features_of(const std::vector<model::DiscriminatorOutput>& outputs);

}  // namespace vis2ir::losses
