#pragma once

// Flat tensor container (safetensors layout):
//   [u64 little-endian header length N][N bytes JSON header][raw data]
// Header maps tensor name -> {"dtype": "F32", "shape": [...],
// "data_offsets": [begin, end]} with offsets relative to the data section.
// An optional "__metadata__" entry holds string -> string pairs.

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sadi {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;

  std::size_t numel() const;
  std::string shape_string() const;
};

using TensorMap = std::map<std::string, Tensor>;
using Metadata = std::map<std::string, std::string>;

struct TensorContainer {
  TensorMap tensors;
  Metadata metadata;
};

// Throws Error{MalformedContainer} on any structural problem.
TensorContainer parse_tensor_container(std::span<const std::byte> bytes);
std::vector<std::byte> serialize_tensor_container(const TensorContainer& c);

TensorContainer read_tensor_file(const std::filesystem::path& path);
void write_tensor_file(const std::filesystem::path& path,
                       const TensorContainer& c);

std::string shape_to_string(std::span<const std::size_t> shape);

}  // namespace sadi
