#pragma once

// Aggregation of instance differences into the layer-major mean difference
// and its top-K binarization into an identification mask.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sadi/difference.hpp"
#include "sadi/element.hpp"

namespace sadi {

enum class UnitKind { Scalar, HeadVector };

inline constexpr UnitKind unit_kind_for(ElementClass c) {
  return c == ElementClass::Head ? UnitKind::HeadVector : UnitKind::Scalar;
}

struct MeanDifference {
  ElementClass element_class = ElementClass::Hidden;
  std::size_t n_layers = 0;
  std::size_t layer_width = 0;
  std::size_t units_per_layer = 0;
  std::size_t n_instances = 0;
  std::vector<float> values;  // [n_layers x layer_width], layer 0 first

  std::size_t unit_width() const { return units_per_layer ? layer_width / units_per_layer : 0; }
  std::size_t total_units() const { return n_layers * units_per_layer; }
  std::span<const float> layer(std::size_t l) const {
    return std::span(values).subspan(l * layer_width, layer_width);
  }
};

struct IdentificationMask {
  ElementClass element_class = ElementClass::Hidden;
  UnitKind unit = UnitKind::Scalar;
  std::size_t n_layers = 0;
  std::size_t units_per_layer = 0;
  std::size_t k = 0;
  std::vector<std::uint8_t> bits;  // [n_layers x units_per_layer]

  std::size_t total_units() const { return n_layers * units_per_layer; }
  std::size_t popcount() const;
  std::vector<std::size_t> set_indices() const;
  std::span<const std::uint8_t> layer_bits(std::size_t l) const {
    return std::span(bits).subspan(l * units_per_layer, units_per_layer);
  }
  bool operator==(const IdentificationMask&) const = default;
};

enum class Ranking {
  Absolute,  // |D| for scalar units
  Signed,    // D itself; experimental, not used by acceptance runs
};

// Throws EmptyBatch, HeterogeneousBatch.
MeanDifference mean_difference(std::span<const InstanceDifference> differences);

// Per-unit score that binarize ranks by: |value| (or value under Signed) for
// scalar units, L2 norm of the d_head-wide slice for head units.
std::vector<float> unit_scores(const MeanDifference& mean, Ranking ranking = Ranking::Absolute);

// Top-K units by score; ties go to the lower flat index. Throws KOutOfRange.
IdentificationMask binarize(const MeanDifference& mean, std::size_t k,
                            Ranking ranking = Ranking::Absolute);

// K units drawn uniformly without replacement from a seeded mt19937_64.
IdentificationMask random_mask(const MeanDifference& shape, std::size_t k, std::uint64_t seed);

// Indices of the `top` highest scores, ties to the lower index, in rank order.
std::vector<std::size_t> top_indices(std::span<const float> scores, std::size_t top);

std::string mask_to_json(const IdentificationMask& mask);
// Throws CorruptMaskFile on duplicate/out-of-range indices or popcount != K.
IdentificationMask mask_from_json(const std::string& text);
void save_mask(const IdentificationMask& mask, const std::filesystem::path& path);
IdentificationMask load_mask(const std::filesystem::path& path);

}  // namespace sadi
