#include "imed/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "imed/io.hpp"

namespace imed {

namespace {

constexpr char kMagic[8] = {'I', 'M', 'E', 'D', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes little-endian");

template <typename T>
void append(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(const std::string& in, std::size_t& pos, const std::string& what) {
  if (pos + sizeof(T) > in.size()) throw IoError(what + ": truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void Archive::put(const ParamList& params) {
  for (auto* p : unique_params(params)) tensors[p->name] = p->value;
}

void Archive::restore(const ParamList& params) const {
  for (auto* p : unique_params(params)) {
    auto it = tensors.find(p->name);
    if (it == tensors.end()) throw DimensionError("checkpoint: missing tensor '" + p->name + "'");
    const Matrix& m = it->second;
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw DimensionError("checkpoint: tensor '" + p->name + "' is " + std::to_string(m.rows()) +
                           "x" + std::to_string(m.cols()) + ", model expects " +
                           std::to_string(p->value.rows()) + "x" + std::to_string(p->value.cols()));
    }
    p->value = m;
  }
}

std::string encode_archive(const Archive& a) {
  nlohmann::json manifest{{"meta", a.meta}, {"tensors", nlohmann::json::array()}};
  std::string payload;
  for (const auto& [name, m] : a.tensors) {
    manifest["tensors"].push_back(
        {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", payload.size()}});
    for (Eigen::Index i = 0; i < m.size(); ++i) append(payload, static_cast<float>(m.data()[i]));
  }
  const std::string text = manifest.dump();
  std::string out(kMagic, sizeof kMagic);
  append(out, kCheckpointVersion);
  append(out, static_cast<std::uint64_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

Archive decode_archive(const std::string& bytes, const std::string& what) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw IoError(what + ": not a checkpoint (bad magic)");
  }
  std::size_t pos = sizeof kMagic;
  const auto version = take<std::uint32_t>(bytes, pos, what);
  if (version != kCheckpointVersion) {
    throw IoError(what + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = take<std::uint64_t>(bytes, pos, what);
  if (pos + len > bytes.size()) throw IoError(what + ": truncated manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(pos, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(what + ": corrupt manifest: " + e.what());
  }
  const std::size_t base = pos + len;
  Archive a;
  try {
    a.meta = manifest.at("meta");
    for (const auto& t : manifest.at("tensors")) {
      const auto rows = t.at("rows").get<Eigen::Index>(), cols = t.at("cols").get<Eigen::Index>();
      std::size_t p = base + t.at("offset").get<std::size_t>();
      Matrix m(rows, cols);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = take<float>(bytes, p, what);
      a.tensors[t.at("name").get<std::string>()] = std::move(m);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": corrupt manifest: " + e.what());
  }
  return a;
}

void save_archive(const std::filesystem::path& path, const Archive& a) {
  write_file_atomic(path, encode_archive(a));
}

Archive load_archive(const std::filesystem::path& path) {
  return decode_archive(read_file(path), path.string());
}

void round_to_float32(const ParamList& params) {
  for (auto* p : unique_params(params)) {
    p->value = p->value.cast<float>().cast<double>();
  }
}

}  // namespace imed
