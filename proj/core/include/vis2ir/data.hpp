#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vis2ir/detection.hpp"
#include "vis2ir/image.hpp"
#include "vis2ir/png_io.hpp"
#include "vis2ir/pyramid.hpp"

namespace vis2ir::data {

enum class Direction { visible_to_infrared, infrared_to_visible };
enum class Split { train, test };

Direction parse_direction(const std::string& s);
std::string to_string(Direction d);
Split parse_split(const std::string& s);
std::string to_string(Split s);

/// A co-registered visible/infrared pair. `direction` decides which modality is the
/// translation source.
struct PairedSample {
  std::string id;
  ImageBuf visible;
  ImageBuf infrared;
  std::optional<std::string> label_text;  // verbatim label file contents
  Direction direction = Direction::visible_to_infrared;

  const ImageBuf& source() const { return direction == Direction::visible_to_infrared ? visible : infrared; }
  const ImageBuf& target() const { return direction == Direction::visible_to_infrared ? infrared : visible; }
  std::optional<std::vector<metrics::DetectionRecord>> labels() const;
};

/// On-disk layout: root/{visible,infrared}/<id>.png, optional root/labels/<id>.txt,
/// optional root/splits/{train,test}.txt listing ids.
struct DatasetManifest {
  std::filesystem::path root;
  Direction direction = Direction::visible_to_infrared;
  Split split = Split::train;
  std::vector<std::string> ids;  // empty: use the split file, else every visible/*.png
};

DatasetManifest read_manifest(const std::filesystem::path& file);
void write_manifest(const std::filesystem::path& file, const DatasetManifest& m);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<PairedSample> samples, Direction direction);

  std::size_t size() const { return samples_.size(); }
  bool empty() const { return samples_.empty(); }
  Direction direction() const { return direction_; }
  const PairedSample& operator[](std::size_t i) const { return samples_[i]; }
  auto begin() const { return samples_.begin(); }
  auto end() const { return samples_.end(); }

 private:
  std::vector<PairedSample> samples_;
  Direction direction_ = Direction::visible_to_infrared;
};

/// Loads every pair of the manifest in ascending id order. Missing counterparts and
/// co-registration violations are hard errors naming the id.
Dataset load_paired_dataset(const DatasetManifest& manifest, ValueRange range = kSignedUnit);

/// Writes the dataset layout (both modalities plus any labels) under `root`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// 8-bit raster to CHW doubles, [0, 255] mapped affinely onto `range`.
ImageBuf normalize(const io::RawImage& raw, ValueRange range = kSignedUnit);
/// CHW values declared to lie in `declared` (e.g. [0, 1] or [0, 255]) mapped onto `range`.
/// Values outside `declared` raise PreconditionError.
ImageBuf normalize(std::span<const double> chw, int channels, int height, int width, ValueRange declared,
                   ValueRange range = kSignedUnit);
/// Inverse of normalize: rounds to the nearest 8-bit level, clamping to [0, 255].
io::RawImage denormalize(const ImageBuf& img);

struct CropRecord {
  int height = 0;
  int width = 0;
  int pad_bottom = 0;
  int pad_right = 0;
};

/// Reflect-pads bottom/right so both extents are multiples of `multiple`.
std::pair<ImageBuf, CropRecord> pad_to_multiple(const ImageBuf& img, int multiple);
ImageBuf crop_back(const ImageBuf& img, const CropRecord& record);

}  // namespace vis2ir::data
