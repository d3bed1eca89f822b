#include "vis2ir/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "vis2ir/error.hpp"
#include "vis2ir/ops.hpp"

namespace vis2ir::data {

namespace fs = std::filesystem;

Direction parse_direction(const std::string& s) {
  if (s == "visible_to_infrared") return Direction::visible_to_infrared;
  if (s == "infrared_to_visible") return Direction::infrared_to_visible;
  throw ConfigError("data.direction", "expected visible_to_infrared or infrared_to_visible, got '" + s + "'");
}

std::string to_string(Direction d) {
  return d == Direction::visible_to_infrared ? "visible_to_infrared" : "infrared_to_visible";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw ConfigError("data.split", "expected train or test, got '" + s + "'");
}

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

std::optional<std::vector<metrics::DetectionRecord>> PairedSample::labels() const {
  if (!label_text) return std::nullopt;
  return metrics::parse_labels(*label_text, id, false);
}

DatasetManifest read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open manifest " + file.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(file.string(), std::string("malformed manifest: ") + e.what());
  }
  DatasetManifest m;
  for (const auto& [key, value] : j.items()) {
    if (key == "root") {
      m.root = value.get<std::string>();
      if (m.root.is_relative()) m.root = file.parent_path() / m.root;
    } else if (key == "direction") {
      m.direction = parse_direction(value.get<std::string>());
    } else if (key == "split") {
      m.split = parse_split(value.get<std::string>());
    } else if (key == "ids") {
      m.ids = value.get<std::vector<std::string>>();
    } else {
      throw ConfigError(key, "unknown manifest key");
    }
  }
  return m;
}

void write_manifest(const fs::path& file, const DatasetManifest& m) {
  nlohmann::ordered_json j;
  j["root"] = m.root.string();
  j["direction"] = to_string(m.direction);
  j["split"] = to_string(m.split);
  j["ids"] = m.ids;
  std::ofstream out(file);
  if (!out) throw IoError("cannot write manifest " + file.string());
  out << j.dump(2) << "\n";
}

Dataset::Dataset(std::vector<PairedSample> samples, Direction direction)
    : samples_(std::move(samples)), direction_(direction) {
  for (auto& s : samples_) s.direction = direction_;
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> resolve_ids(const DatasetManifest& m) {
  std::vector<std::string> ids = m.ids;
  if (ids.empty()) {
    const fs::path split_file = m.root / "splits" / (to_string(m.split) + ".txt");
    if (fs::exists(split_file)) {
      std::istringstream in(read_text(split_file));
      std::string line;
      while (std::getline(in, line)) {
        line.erase(line.find_last_not_of(" \t\r") + 1);
        if (!line.empty()) ids.push_back(line);
      }
    } else {
      const fs::path vis = m.root / "visible";
      if (!fs::is_directory(vis)) throw IoError("dataset has no visible/ directory: " + m.root.string());
      for (const auto& e : fs::directory_iterator(vis))
        if (e.is_regular_file() && e.path().extension() == ".png") ids.push_back(e.path().stem().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace

Dataset load_paired_dataset(const DatasetManifest& manifest, ValueRange range) {
  if (!fs::is_directory(manifest.root)) throw IoError("dataset root does not exist: " + manifest.root.string());
  std::vector<PairedSample> samples;
  for (const auto& id : resolve_ids(manifest)) {
    const fs::path vis = manifest.root / "visible" / (id + ".png");
    const fs::path ir = manifest.root / "infrared" / (id + ".png");
    if (!fs::exists(vis)) throw IoError("sample '" + id + "': missing visible image " + vis.string());
    if (!fs::exists(ir)) throw IoError("sample '" + id + "': missing infrared image " + ir.string());
    PairedSample s;
    s.id = id;
    s.visible = normalize(io::read_png(vis), range);
    s.infrared = normalize(io::read_png(ir), range);
    if (!s.visible.same_extent(s.infrared)) {
      throw PreconditionError("sample '" + id + "': visible and infrared extents differ");
    }
    const fs::path labels = manifest.root / "labels" / (id + ".txt");
    if (fs::exists(labels)) s.label_text = read_text(labels);
    samples.push_back(std::move(s));
  }
  return Dataset(std::move(samples), manifest.direction);
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root / "visible");
  fs::create_directories(root / "infrared");
  for (const auto& s : dataset) {
    io::write_png(root / "visible" / (s.id + ".png"), denormalize(s.visible));
    io::write_png(root / "infrared" / (s.id + ".png"), denormalize(s.infrared));
    if (s.label_text) {
      fs::create_directories(root / "labels");
      std::ofstream out(root / "labels" / (s.id + ".txt"), std::ios::binary);
      out << *s.label_text;
      if (!out) throw IoError("cannot write labels for " + s.id);
    }
  }
}

ImageBuf normalize(const io::RawImage& raw, ValueRange range) {
  ImageBuf out(raw.channels, raw.height, raw.width, range);
  const double k = range.span() / 255.0;
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < raw.channels; ++c) {
        const auto v = raw.pixels[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c];
        out.at(c, y, x) = range.lo + k * v;
      }
  return out;
}

ImageBuf normalize(std::span<const double> chw, int channels, int height, int width, ValueRange declared,
                   ValueRange range) {
  if (chw.size() != static_cast<std::size_t>(channels) * height * width) {
    throw PreconditionError("normalize: buffer size does not match extent");
  }
  for (double v : chw)
    if (!declared.contains(v)) {
      throw PreconditionError("normalize: value " + std::to_string(v) + " outside declared input range [" +
                              std::to_string(declared.lo) + ", " + std::to_string(declared.hi) + "]");
    }
  ImageBuf raw(Tensor({1, channels, height, width}, std::vector<double>(chw.begin(), chw.end())), declared);
  return remap(raw, range);
}

io::RawImage denormalize(const ImageBuf& img) {
  io::RawImage raw;
  raw.channels = img.channels();
  raw.height = img.height();
  raw.width = img.width();
  raw.pixels.resize(static_cast<std::size_t>(raw.channels) * raw.height * raw.width);
  const double k = 255.0 / img.range.span();
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < raw.channels; ++c) {
        const double v = std::clamp(std::round((img.at(c, y, x) - img.range.lo) * k), 0.0, 255.0);
        raw.pixels[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] = static_cast<std::uint8_t>(v);
      }
  return raw;
}

std::pair<ImageBuf, CropRecord> pad_to_multiple(const ImageBuf& img, int multiple) {
  if (multiple < 1) throw PreconditionError("pad_to_multiple: multiple must be >= 1");
  CropRecord rec{img.height(), img.width(), 0, 0};
  rec.pad_bottom = (multiple - img.height() % multiple) % multiple;
  rec.pad_right = (multiple - img.width() % multiple) % multiple;
  if (rec.pad_bottom == 0 && rec.pad_right == 0) return {img, rec};
  NoGradGuard no_grad;
  Var padded = ops::reflect_pad(Var::constant(img.pixels), 0, rec.pad_bottom, 0, rec.pad_right);
  return {ImageBuf(padded.value(), img.range), rec};
}

ImageBuf crop_back(const ImageBuf& img, const CropRecord& record) {
  if (img.height() < record.height || img.width() < record.width) {
    throw PreconditionError("crop_back: image smaller than the recorded extent");
  }
  ImageBuf out(img.channels(), record.height, record.width, img.range);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < record.height; ++y)
      for (int x = 0; x < record.width; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

}  // namespace vis2ir::data
