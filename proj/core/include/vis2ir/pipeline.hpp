#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "vis2ir/data.hpp"
#include "vis2ir/model.hpp"
#include "vis2ir/superres.hpp"

namespace vis2ir::data {

/// Pads to the generator divisor, translates in full mode, crops back and optionally applies
/// 2x super-resolution. Channel count and range are adapted to the generator on the way in;
/// the result is in the generator's value range.
ImageBuf translate_image(const model::Generator& generator, const ImageBuf& source,
                         const superres::SrNetwork* sr = nullptr);

struct ExportSummary {
  std::size_t exported = 0;
  std::vector<std::string> skipped;  // ids without labels
  std::vector<std::string> warnings;
};

/// Writes out/images/<id>.png (translated source), out/labels/<id>.txt (copied verbatim)
/// and out/manifest.json. Samples without labels are skipped and listed.
ExportSummary export_detection_dataset(const Dataset& dataset, const model::Generator& generator,
                                       const std::filesystem::path& out_root,
                                       const superres::SrNetwork* sr = nullptr);

}  // namespace vis2ir::data
