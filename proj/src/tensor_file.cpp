#include "sadi/tensor_file.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi {

using json = nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) {
  throw Error(ErrorKind::MalformedContainer, what);
}

std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

float load_f32_le(const std::byte* p) {
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  return std::bit_cast<float>(bits);
}

void store_f32_le(std::byte* p, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  if constexpr (std::endian::native == std::endian::big) bits = bswap32(bits);
  std::memcpy(p, &bits, 4);
}

}  // namespace

std::size_t Tensor::numel() const {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string Tensor::shape_string() const { return shape_to_string(shape); }

std::string shape_to_string(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

TensorContainer parse_tensor_container(std::span<const std::byte> bytes) {
  if (bytes.size() < 8) malformed("container shorter than the 8-byte header length");
  std::uint64_t header_len = 0;
  for (int i = 7; i >= 0; --i)
    header_len = (header_len << 8) | std::to_integer<std::uint64_t>(bytes[i]);
  if (header_len > bytes.size() - 8) malformed("header length exceeds container size");

  const char* header_begin = reinterpret_cast<const char*>(bytes.data() + 8);
  json header;
  try {
    header = json::parse(header_begin, header_begin + header_len);
  } catch (const json::exception& e) {
    malformed(std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) malformed("header is not a JSON object");

  const auto data = bytes.subspan(8 + header_len);
  TensorContainer out;
  for (auto it = header.begin(); it != header.end(); ++it) {
    const std::string& name = it.key();
    const json& entry = it.value();
    if (name == "__metadata__") {
      if (!entry.is_object()) malformed("__metadata__ is not an object");
      for (auto m = entry.begin(); m != entry.end(); ++m) {
        if (!m.value().is_string()) malformed("__metadata__ values must be strings");
        out.metadata[m.key()] = m.value().get<std::string>();
      }
      continue;
    }
    try {
      const auto dtype = entry.at("dtype").get<std::string>();
      if (dtype != "F32") malformed("tensor '" + name + "' has unsupported dtype " + dtype);
      Tensor t;
      t.shape = entry.at("shape").get<std::vector<std::size_t>>();
      const auto offsets = entry.at("data_offsets").get<std::vector<std::size_t>>();
      if (offsets.size() != 2 || offsets[0] > offsets[1] || offsets[1] > data.size())
        malformed("tensor '" + name + "' has out-of-range data_offsets");
      const std::size_t n = t.numel();
      if (offsets[1] - offsets[0] != n * 4)
        malformed("tensor '" + name + "' byte range does not match shape " + t.shape_string());
      t.data.resize(n);
      const std::byte* src = data.data() + offsets[0];
      for (std::size_t i = 0; i < n; ++i) t.data[i] = load_f32_le(src + 4 * i);
      out.tensors.emplace(name, std::move(t));
    } catch (const json::exception& e) {
      malformed("tensor '" + name + "' entry is malformed: " + e.what());
    }
  }
  return out;
}

std::vector<std::byte> serialize_tensor_container(const TensorContainer& c) {
  json header = json::object();
  std::size_t offset = 0;
  for (const auto& [name, t] : c.tensors) {
    if (t.data.size() != t.numel())
      throw Error(ErrorKind::ShapeMismatch,
                  "tensor '" + name + "' data length disagrees with shape " + t.shape_string());
    const std::size_t bytes = t.data.size() * 4;
    header[name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  if (!c.metadata.empty()) header["__metadata__"] = c.metadata;

  std::string header_text = header.dump();
  // Pad with spaces so the data section starts 8-byte aligned.
  while ((8 + header_text.size()) % 8 != 0) header_text.push_back(' ');

  std::vector<std::byte> out(8 + header_text.size() + offset);
  std::uint64_t len = header_text.size();
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::byte>((len >> (8 * i)) & 0xff);
  std::memcpy(out.data() + 8, header_text.data(), header_text.size());
  std::byte* dst = out.data() + 8 + header_text.size();
  for (const auto& [name, t] : c.tensors) {
    for (float v : t.data) {
      store_f32_le(dst, v);
      dst += 4;
    }
  }
  return out;
}

TensorContainer read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_tensor_container(
      std::span(reinterpret_cast<const std::byte*>(raw.data()), raw.size()));
}

void write_tensor_file(const std::filesystem::path& path, const TensorContainer& c) {
  const auto bytes = serialize_tensor_container(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

}  // namespace sadi
