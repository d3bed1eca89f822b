#include "vis2ir/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "vis2ir/error.hpp"

namespace vis2ir::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are little-endian");

namespace {

constexpr char kMagic[8] = {'V', '2', 'I', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }

  const char* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IntegrityError("checkpoint truncated");
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

const Tensor& Archive::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw IntegrityError("checkpoint has no tensor '" + name + "'");
}

std::string encode(const Archive& archive) {
  nlohmann::ordered_json header;
  header["component"] = archive.component;
  header["manifest"] = nlohmann::ordered_json::parse(archive.manifest_json);
  nlohmann::ordered_json index = nlohmann::ordered_json::array();
  for (const auto& t : archive.tensors) {
    const Shape s = t.value.shape();
    index.push_back({{"name", t.name}, {"shape", {s.n, s.c, s.h, s.w}}});
  }
  header["tensors"] = index;
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  for (const auto& t : archive.tensors) {
    const auto v = t.value.values();
    out.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  }
  put<std::uint64_t>(out, fnv1a(out.data(), out.size()));
  return out;
}

Archive decode(const std::string& bytes) {
  Reader in(bytes);
  if (bytes.size() < sizeof kMagic || std::memcmp(in.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kFormatVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kFormatVersion) + ")");
  }
  if (bytes.size() < sizeof kMagic + 4 + 8 + 8) throw IntegrityError("checkpoint truncated");
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof stored);
  if (stored != fnv1a(bytes.data(), body)) throw IntegrityError("checkpoint checksum mismatch");

  const auto header_len = in.get<std::uint64_t>();
  if (header_len > body - in.pos()) throw IntegrityError("checkpoint header length out of range");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(std::string(in.take(header_len), header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  Archive a;
  try {
    a.component = header.at("component").get<std::string>();
    a.manifest_json = header.at("manifest").dump();
    for (const auto& entry : header.at("tensors")) {
      const auto dims = entry.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw IntegrityError("tensor shape must have 4 dims");
      for (int d : dims)
        if (d < 0) throw IntegrityError("negative tensor dimension");
      const Shape s{dims[0], dims[1], dims[2], dims[3]};
      const std::size_t nbytes = s.numel() * sizeof(double);
      if (nbytes > body - in.pos()) throw IntegrityError("checkpoint truncated");
      std::vector<double> v(s.numel());
      std::memcpy(v.data(), in.take(nbytes), nbytes);
      a.tensors.push_back({entry.at("name").get<std::string>(), Tensor(s, std::move(v))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (in.pos() != body) throw IntegrityError("trailing bytes after tensor data");
  return a;
}

void write_archive(const std::filesystem::path& file, const Archive& archive) {
  const std::string bytes = encode(archive);
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::filesystem::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, file);
}

Archive read_archive(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode(ss.str());
}

Archive read_archive(const std::filesystem::path& file, const std::string& component) {
  Archive a = read_archive(file);
  if (a.component != component) {
    throw PreconditionError(file.string() + " holds a '" + a.component + "' checkpoint, expected '" + component + "'");
  }
  return a;
}

}  // namespace vis2ir::checkpoint
