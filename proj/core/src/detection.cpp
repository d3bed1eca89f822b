#include "vis2ir/detection.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "vis2ir/error.hpp"

namespace vis2ir::metrics {

bool Box::valid() const {
  constexpr double slack = 1e-6;
  return w >= 0.0 && h >= 0.0 && x0() >= -slack && y0() >= -slack && x1() <= 1.0 + slack && y1() <= 1.0 + slack;
}

std::vector<DetectionRecord> parse_labels(std::string_view text, const std::string& image_id, bool with_score) {
  std::vector<DetectionRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    DetectionRecord r;
    r.image_id = image_id;
    double score = 0.0;
    if (!(fields >> r.class_id >> r.box.cx >> r.box.cy >> r.box.w >> r.box.h) ||
        (with_score && !(fields >> score))) {
      throw PreconditionError(image_id + ":" + std::to_string(line_no) + ": expected 'class cx cy w h" +
                              (with_score ? " score'" : "'"));
    }
    std::string extra;
    if (fields >> extra) throw PreconditionError(image_id + ":" + std::to_string(line_no) + ": trailing field");
    if (r.class_id < 0) throw PreconditionError(image_id + ":" + std::to_string(line_no) + ": negative class id");
    if (!r.box.valid()) throw PreconditionError(image_id + ":" + std::to_string(line_no) + ": box outside unit square");
    if (with_score) {
      if (!(score >= 0.0 && score <= 1.0)) {
        throw PreconditionError(image_id + ":" + std::to_string(line_no) + ": score outside [0, 1]");
      }
      r.score = score;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_label(const DetectionRecord& r) {
  char buf[160];
  if (r.score) {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f %.6f", r.class_id, r.box.cx, r.box.cy, r.box.w, r.box.h,
                  *r.score);
  } else {
    std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f", r.class_id, r.box.cx, r.box.cy, r.box.w, r.box.h);
  }
  return buf;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

ApConvention parse_ap_convention(const std::string& s) {
  if (s == "all_point") return ApConvention::all_point;
  if (s == "voc11") return ApConvention::voc11;
  throw ConfigError("ap_convention", "expected all_point or voc11, got '" + s + "'");
}

double average_precision(const std::vector<bool>& ranked_hits, std::size_t positives, ApConvention convention) {
  if (positives == 0) return 0.0;
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < ranked_hits.size(); ++i) {
    tp += ranked_hits[i] ? 1 : 0;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
  }
  if (convention == ApConvention::voc11) {
    double acc = 0.0;
    for (int t = 0; t <= 10; ++t) {
      const double level = t / 10.0;
      double best = 0.0;
      for (std::size_t i = 0; i < recall.size(); ++i)
        if (recall[i] >= level) best = std::max(best, precision[i]);
      acc += best;
    }
    return acc / 11.0;
  }
  std::vector<double> mrec{0.0};
  std::vector<double> mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0.0;
  for (std::size_t i = 1; i < mrec.size(); ++i)
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  return ap;
}

DetectionReport mean_average_precision(const std::vector<DetectionRecord>& predictions,
                                       const std::vector<DetectionRecord>& ground_truth, double iou_threshold,
                                       ApConvention convention) {
  DetectionReport report;
  report.iou_threshold = iou_threshold;
  report.prediction_count = predictions.size();
  report.ground_truth_count = ground_truth.size();
  for (const auto& p : predictions)
    if (!p.score) throw PreconditionError("prediction for " + p.image_id + " has no score");

  std::set<int> classes;
  for (const auto& g : ground_truth) classes.insert(g.class_id);
  if (classes.empty()) {
    report.empty_ground_truth = true;
    return report;
  }

  for (int cls : classes) {
    std::vector<std::size_t> preds;
    for (std::size_t i = 0; i < predictions.size(); ++i)
      if (predictions[i].class_id == cls) preds.push_back(i);
    std::stable_sort(preds.begin(), preds.end(), [&](std::size_t a, std::size_t b) {
      const auto& pa = predictions[a];
      const auto& pb = predictions[b];
      if (*pa.score != *pb.score) return *pa.score > *pb.score;
      return pa.image_id < pb.image_id;
    });

    std::vector<std::size_t> gts;
    for (std::size_t i = 0; i < ground_truth.size(); ++i)
      if (ground_truth[i].class_id == cls) gts.push_back(i);
    std::vector<bool> matched(gts.size(), false);

    std::vector<bool> hits;
    hits.reserve(preds.size());
    for (std::size_t pi : preds) {
      const auto& p = predictions[pi];
      double best = -1.0;
      std::size_t best_j = gts.size();
      for (std::size_t j = 0; j < gts.size(); ++j) {
        const auto& g = ground_truth[gts[j]];
        if (matched[j] || g.image_id != p.image_id) continue;
        const double o = iou(p.box, g.box);
        if (o >= iou_threshold && o > best) {
          best = o;
          best_j = j;
        }
      }
      if (best_j < gts.size()) matched[best_j] = true;
      hits.push_back(best_j < gts.size());
    }
    report.per_class_ap[cls] = average_precision(hits, gts.size(), convention);
  }
  double acc = 0.0;
  for (const auto& [cls, ap] : report.per_class_ap) acc += ap;
  report.map = acc / static_cast<double>(report.per_class_ap.size());
  return report;
}

}  // namespace vis2ir::metrics
