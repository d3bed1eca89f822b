#include "vis2ir/losses.hpp"

#include <cmath>

#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"

namespace vis2ir::losses {

GanMode parse_gan_mode(const std::string& s) {
  if (s == "least_squares") return GanMode::least_squares;
  if (s == "log_likelihood") return GanMode::log_likelihood;
  throw ConfigError("loss.gan_mode", "expected least_squares or log_likelihood, got '" + s + "'");
}

std::string to_string(GanMode m) { return m == GanMode::least_squares ? "least_squares" : "log_likelihood"; }

void LossWeights::validate() const {
  if (!(lambda_fm >= 0.0) || !std::isfinite(lambda_fm)) throw ConfigError("loss.lambda_fm", "must be finite and >= 0");
}

bool LossReport::consistent(const LossWeights& w, double tol) const {
  return fm >= 0.0 && std::abs(total_g - (gan_g + w.lambda_fm * fm)) <= tol * std::max(1.0, std::abs(total_g));
}

bool LossReport::finite() const {
  return std::isfinite(gan_g) && std::isfinite(gan_d) && std::isfinite(fm) && std::isfinite(total_g);
}

Var gan_loss_d_scale(const model::ScoreMap& real, const model::ScoreMap& fake, GanMode mode) {
  if (mode == GanMode::least_squares) {
    const Var terms[] = {ops::mean_squared_to(real.logits, 1.0), ops::mean_squared_to(fake.logits, 0.0)};
    return ops::add_n(terms);
  }
  const Var terms[] = {ops::bce_with_logits_mean(real.logits, 1.0), ops::bce_with_logits_mean(fake.logits, 0.0)};
  return ops::add_n(terms);
}

Var gan_loss_g_scale(const model::ScoreMap& fake, GanMode mode) {
  if (mode == GanMode::least_squares) return ops::mean_squared_to(fake.logits, 1.0);
  return ops::bce_with_logits_mean(fake.logits, 1.0);
}

Var feature_matching_scale(const model::FeatureStack& real, const model::FeatureStack& fake) {
  if (real.size() != fake.size() || real.size() != real.element_counts.size() ||
      fake.size() != fake.element_counts.size()) {
    throw PreconditionError("feature_matching: layer counts differ (" + std::to_string(real.size()) + " vs " +
                            std::to_string(fake.size()) + ")");
  }
  if (real.size() == 0) throw PreconditionError("feature_matching: empty feature stack");
  std::vector<Var> terms;
  terms.reserve(real.size());
  for (std::size_t i = 0; i < real.size(); ++i) {
    const Shape& rs = real.layers[i].shape();
    if (rs != fake.layers[i].shape()) {
      throw PreconditionError("feature_matching: layer " + std::to_string(i) + " shape " + to_string(rs) + " vs " +
                              to_string(fake.layers[i].shape()));
    }
    if (real.element_counts[i] != rs.sample()) {
      throw PreconditionError("feature_matching: element count of layer " + std::to_string(i) +
                              " does not match its tensor");
    }
    const double norm = 1.0 / (static_cast<double>(rs.n) * static_cast<double>(real.element_counts[i]));
    terms.push_back(ops::scale(ops::l1_sum(fake.layers[i], real.layers[i].detach()), norm));
  }
  return ops::add_n(terms);
}

Var gan_loss_d(std::span<const model::ScoreMap> real, std::span<const model::ScoreMap> fake, GanMode mode) {
  if (real.empty() || real.size() != fake.size()) {
    throw PreconditionError("gan_loss_d: need matching nonempty score lists, got " + std::to_string(real.size()) +
                            " and " + std::to_string(fake.size()));
  }
  std::vector<Var> terms;
  for (std::size_t k = 0; k < real.size(); ++k) terms.push_back(gan_loss_d_scale(real[k], fake[k], mode));
  return ops::add_n(terms);
}

Var gan_loss_g(std::span<const model::ScoreMap> fake, GanMode mode) {
  if (fake.empty()) throw PreconditionError("gan_loss_g: empty score list");
  std::vector<Var> terms;
  for (const auto& f : fake) terms.push_back(gan_loss_g_scale(f, mode));
  return ops::add_n(terms);
}

Var feature_matching_loss(std::span<const model::FeatureStack> real, std::span<const model::FeatureStack> fake) {
  if (real.empty() || real.size() != fake.size()) {
    throw PreconditionError("feature_matching_loss: need matching nonempty stack lists, got " +
                            std::to_string(real.size()) + " and " + std::to_string(fake.size()));
  }
  std::vector<Var> terms;
  for (std::size_t k = 0; k < real.size(); ++k) terms.push_back(feature_matching_scale(real[k], fake[k]));
  return ops::add_n(terms);
}

double total_generator_objective(double gan_g, double fm, const LossWeights& w) {
  if (fm < 0.0) throw PreconditionError("total_generator_objective: negative feature-matching loss");
  return gan_g + w.lambda_fm * fm;
}

Var total_generator_objective(const Var& gan_g, const Var& fm, const LossWeights& w) {
  if (fm.value().item() < 0.0) throw PreconditionError("total_generator_objective: negative feature-matching loss");
  const Var terms[] = {gan_g, ops::scale(fm, w.lambda_fm)};
  return ops::add_n(terms);
}

std::vector<model::ScoreMap> scores_of(const std::vector<model::DiscriminatorOutput>& outputs) {
  std::vector<model::ScoreMap> out;
  for (const auto& o : outputs) out.push_back(o.scores);
  return out;
}

std::vector<model::FeatureStack> features_of(const std::vector<model::DiscriminatorOutput>& outputs) {
  std::vector<model::FeatureStack> out;
  for (const auto& o : outputs) out.push_back(o.features);
  return out;
}

}  // namespace vis2ir::losses
