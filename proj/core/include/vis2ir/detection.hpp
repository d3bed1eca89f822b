#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vis2ir::metrics {

/// Axis-aligned box in normalised centre/size form.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  double x0() const { return cx - w / 2.0; }
  double x1() const { return cx + w / 2.0; }
  double y0() const { return cy - h / 2.0; }
  double y1() const { return cy + h / 2.0; }
  double area() const { return w * h; }
  /// Non-negative size and fully inside the unit square (1e-6 slack).
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

struct DetectionRecord {
  std::string image_id;
  int class_id = 0;
  Box box;
  std::optional<double> score;  // absent for ground truth

  friend bool operator==(const DetectionRecord&, const DetectionRecord&) = default;
};

/// Parses `class cx cy w h [score]` lines. Blank lines and '#' comments are skipped.
/// Throws PreconditionError with the 1-based line number on malformed input.
std::vector<DetectionRecord> parse_labels(std::string_view text, const std::string& image_id, bool with_score);
std::string format_label(const DetectionRecord& r);

double iou(const Box& a, const Box& b);

enum class ApConvention { all_point, voc11 };

ApConvention parse_ap_convention(const std::string& s);

struct DetectionReport {
  std::map<int, double> per_class_ap;  // classes present in ground truth
  double map = 0.0;
  double iou_threshold = 0.5;
  std::size_t prediction_count = 0;
  std::size_t ground_truth_count = 0;
  bool empty_ground_truth = false;
};

/// Per class: predictions sorted by descending score (ties by image_id, then input order),
/// each matched to the highest-IoU still-unmatched ground truth of the same image with
/// IoU >= threshold; AP is the area under the interpolated precision/recall curve; mAP is
/// the mean over classes present in ground truth.
DetectionReport mean_average_precision(const std::vector<DetectionRecord>& predictions,
                                       const std::vector<DetectionRecord>& ground_truth, double iou_threshold = 0.5,
                                       ApConvention convention = ApConvention::all_point);

/// Area under the precision envelope for a ranked list of hit/miss flags.
double average_precision(const std::vector<bool>& ranked_hits, std::size_t positives,
                         ApConvention convention = ApConvention::all_point);

}  // namespace vis2ir::metrics
