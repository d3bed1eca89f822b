#pragma once

// Generators and independent oracles shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "vis2ir/autograd.hpp"
#include "vis2ir/detection.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/training.hpp"

namespace vis2ir::test {

inline Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

struct GradCheck {
  double max_rel = 0.0;  // ||analytic - numeric|| / max(||analytic||, ||numeric||)
  double max_abs = 0.0;
};

/// Central differences of `f` w.r.t. every element of every input, compared with backward().
inline GradCheck grad_check(const std::function<Var(const std::vector<Var>&)>& f, const std::vector<Tensor>& inputs,
                            double h = 1e-6) {
  std::vector<Var> leaves;
  for (const auto& t : inputs) leaves.push_back(Var::leaf(t));
  backward(f(leaves));
  GradCheck out;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = leaves[k].grad();
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      auto eval = [&](double delta) {
        std::vector<Var> probe;
        for (std::size_t j = 0; j < inputs.size(); ++j) {
          Tensor t = inputs[j];
          if (j == k) t[i] += delta;
          probe.push_back(Var::constant(t));
        }
        NoGradGuard ng;
        return f(probe).value().item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2.0 * h);
      const double d = analytic[i] - numeric;
      diff2 += d * d;
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
      out.max_abs = std::max(out.max_abs, std::abs(d));
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    out.max_rel = std::max(out.max_rel, std::sqrt(diff2) / denom);
  }
  return out;
}

/// Feature-matching loss straight from the definition: for each layer, the batch-averaged
/// L1 distance divided by the layer's per-sample element count, summed over layers.
inline double feature_matching_oracle(const std::vector<Tensor>& real, const std::vector<Tensor>& fake) {
  double total = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const Shape s = real[i].shape();
    double l1 = 0.0;
    for (int n = 0; n < s.n; ++n)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h; ++y)
          for (int x = 0; x < s.w; ++x) l1 += std::abs(real[i].at(n, c, y, x) - fake[i].at(n, c, y, x));
    total += l1 / (static_cast<double>(s.n) * static_cast<double>(s.c * s.h * s.w));
  }
  return total;
}

/// mAP by exhaustive search. For each class, every injective partial assignment of ranked
/// predictions to same-image ground truths with IoU >= threshold is enumerated; the one that
/// is lexicographically largest in rank order under the key (IoU, -gt index), with
/// "unassigned" below any assignment, is the greedy rule's unique outcome. AP is then the
/// mean over ground truths of the best precision at or beyond each hit.
inline metrics::DetectionReport brute_force_map(const std::vector<metrics::DetectionRecord>& preds,
                                                const std::vector<metrics::DetectionRecord>& gts, double thr) {
  metrics::DetectionReport rep;
  std::set<int> classes;
  for (const auto& g : gts) classes.insert(g.class_id);
  if (classes.empty()) {
    rep.empty_ground_truth = true;
    return rep;
  }
  for (int cls : classes) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < preds.size(); ++i)
      if (preds[i].class_id == cls) order.push_back(i);
    // Insertion sort by (score desc, image_id asc, input index asc).
    for (std::size_t i = 1; i < order.size(); ++i)
      for (std::size_t j = i; j > 0; --j) {
        const auto& a = preds[order[j - 1]];
        const auto& b = preds[order[j]];
        const bool swap = *b.score > *a.score || (*b.score == *a.score && b.image_id < a.image_id);
        if (!swap) break;
        std::swap(order[j - 1], order[j]);
      }
    std::vector<std::size_t> g;
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (gts[j].class_id == cls) g.push_back(j);

    using Key = std::vector<std::pair<double, double>>;
    Key best_key;
    std::vector<int> best_assign;
    std::vector<int> assign(order.size(), -1);
    std::vector<bool> used(g.size(), false);
    std::function<void(std::size_t)> rec = [&](std::size_t i) {
      if (i == order.size()) {
        Key key;
        for (std::size_t r = 0; r < order.size(); ++r) {
          if (assign[r] < 0) {
            key.emplace_back(-1.0, 0.0);
          } else {
            key.emplace_back(metrics::iou(preds[order[r]].box, gts[g[static_cast<std::size_t>(assign[r])]].box),
                             -static_cast<double>(assign[r]));
          }
        }
        if (best_key.empty() || key > best_key) {
          best_key = key;
          best_assign = assign;
        }
        return;
      }
      assign[i] = -1;
      rec(i + 1);
      for (std::size_t j = 0; j < g.size(); ++j) {
        if (used[j] || gts[g[j]].image_id != preds[order[i]].image_id) continue;
        if (metrics::iou(preds[order[i]].box, gts[g[j]].box) < thr) continue;
        used[j] = true;
        assign[i] = static_cast<int>(j);
        rec(i + 1);
        used[j] = false;
        assign[i] = -1;
      }
    };
    rec(0);

    double ap = 0.0;
    for (std::size_t k = 0; k < best_assign.size(); ++k) {
      if (best_assign[k] < 0) continue;
      double best_prec = 0.0;
      std::size_t tp = 0;
      for (std::size_t j = 0; j < best_assign.size(); ++j) {
        tp += best_assign[j] >= 0 ? 1 : 0;
        if (j >= k) best_prec = std::max(best_prec, static_cast<double>(tp) / static_cast<double>(j + 1));
      }
      ap += best_prec;
    }
    rep.per_class_ap[cls] = g.empty() ? 0.0 : ap / static_cast<double>(g.size());
  }
  double acc = 0.0;
  for (const auto& [c, v] : rep.per_class_ap) acc += v;
  rep.map = acc / static_cast<double>(rep.per_class_ap.size());
  return rep;
}

struct DetectionInstance {
  std::vector<metrics::DetectionRecord> preds;
  std::vector<metrics::DetectionRecord> gts;
};

/// At most 6 predictions and 4 ground truths over 2 images and 2 classes. Predictions are
/// mostly jittered copies of ground truths, and scores come from a small set, so ties and
/// near-threshold overlaps are common.
inline DetectionInstance random_detection_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  auto box = [&] {
    const double w = uni(0.1, 0.4);
    const double h = uni(0.1, 0.4);
    return metrics::Box{uni(w / 2, 1 - w / 2), uni(h / 2, 1 - h / 2), w, h};
  };
  DetectionInstance inst;
  const int n_gt = pick(5);
  for (int i = 0; i < n_gt; ++i) inst.gts.push_back({pick(2) ? "b" : "a", pick(2), box(), std::nullopt});
  const int n_pred = pick(7);
  const double scores[] = {0.3, 0.6, 0.9};
  for (int i = 0; i < n_pred; ++i) {
    metrics::DetectionRecord p;
    if (!inst.gts.empty() && pick(4) != 0) {
      const auto& g = inst.gts[static_cast<std::size_t>(pick(static_cast<int>(inst.gts.size())))];
      p = g;
      const double j = 0.06;
      p.box.w = std::clamp(g.box.w + uni(-j, j), 0.05, 0.45);
      p.box.h = std::clamp(g.box.h + uni(-j, j), 0.05, 0.45);
      p.box.cx = std::clamp(g.box.cx + uni(-j, j), p.box.w / 2, 1 - p.box.w / 2);
      p.box.cy = std::clamp(g.box.cy + uni(-j, j), p.box.h / 2, 1 - p.box.h / 2);
      if (pick(5) == 0) p.class_id = 1 - p.class_id;
    } else {
      p = {pick(2) ? "b" : "a", pick(2), box(), std::nullopt};
    }
    p.score = scores[pick(3)];
    inst.preds.push_back(p);
  }
  return inst;
}

/// A generator/discriminator pair small enough for many training steps in a unit test.
inline model::GeneratorSpec tiny_generator_spec() {
  model::GeneratorSpec g;
  g.input_channels = 3;
  g.output_channels = 1;
  g.base_width = 8;
  g.g1_downsamples = 1;
  g.g1_res_blocks = 1;
  g.g2_res_blocks = 1;
  g.enhancer_count = 1;
  return g;
}

inline model::DiscriminatorSpec tiny_discriminator_spec() {
  model::DiscriminatorSpec d;
  d.n_scales = 2;
  d.conv_layers = 2;
  d.base_width = 4;
  d.input_channels = 4;
  return d;
}

inline training::TrainConfig tiny_train_config(std::int64_t stage1, std::int64_t joint) {
  training::TrainConfig c;
  c.stage1_steps = stage1;
  c.joint_steps = joint;
  c.batch_size = 2;
  c.train_height = 16;
  c.train_width = 32;
  c.seed = 5;
  return c;
}

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vis2ir_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace vis2ir::test
