#include "vis2ir/pipeline.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "vis2ir/error.hpp"

namespace vis2ir::data {

ImageBuf translate_image(const model::Generator& generator, const ImageBuf& source, const superres::SrNetwork* sr) {
  const auto& spec = generator.spec();
  ImageBuf in = remap(to_channels(source, spec.input_channels), spec.value_range);
  auto [padded, record] = pad_to_multiple(in, spec.divisor());
  ImageBuf out = crop_back(generator.forward(padded, model::GeneratorMode::full), record);
  if (sr) out = superres::sr_forward(*sr, out);
  return out;
}

ExportSummary export_detection_dataset(const Dataset& dataset, const model::Generator& generator,
                                       const std::filesystem::path& out_root, const superres::SrNetwork* sr) {
  namespace fs = std::filesystem;
  fs::create_directories(out_root / "images");
  fs::create_directories(out_root / "labels");
  ExportSummary summary;
  std::vector<std::string> exported_ids;
  for (const auto& s : dataset) {
    if (!s.label_text) {
      summary.skipped.push_back(s.id);
      summary.warnings.push_back("sample '" + s.id + "' has no labels; skipped");
      continue;
    }
    io::write_png(out_root / "images" / (s.id + ".png"), denormalize(translate_image(generator, s.source(), sr)));
    std::ofstream labels(out_root / "labels" / (s.id + ".txt"), std::ios::binary);
    labels << *s.label_text;
    if (!labels) throw IoError("cannot write labels for " + s.id);
    exported_ids.push_back(s.id);
    ++summary.exported;
  }
  nlohmann::ordered_json m;
  m["direction"] = to_string(dataset.direction());
  m["superres"] = sr != nullptr;
  m["exported"] = summary.exported;
  m["ids"] = exported_ids;
  m["skipped_count"] = summary.skipped.size();
  m["skipped"] = summary.skipped;
  std::ofstream out(out_root / "manifest.json");
  out << m.dump(2) << "\n";
  if (!out) throw IoError("cannot write export manifest under " + out_root.string());
  return summary;
}

}  // namespace vis2ir::data
