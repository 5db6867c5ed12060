#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "sadi/mask.hpp"

namespace sadi {

struct HeatmapTable {
  struct Row {
    std::size_t layer;
    std::size_t unit;
    float score;
  };
  std::vector<Row> rows;  // (layer, unit) ascending

  std::string to_csv() const;
};

// One row per unit, scored exactly as binarize ranks them.
HeatmapTable difference_heatmap(const MeanDifference& mean);

// How many of the `top` highest-scoring units sit in each layer.
// Throws KOutOfRange unless 1 <= top <= total units.
std::vector<std::size_t> topk_layer_histogram(const MeanDifference& mean, std::size_t top = 100);
std::string histogram_to_csv(const std::vector<std::size_t>& counts);

struct OverlapMatrix {
  std::vector<std::string> tasks;
  std::vector<double> values;  // row-major [tasks x tasks]

  double at(std::size_t a, std::size_t b) const { return values[a * tasks.size() + b]; }
  std::string to_csv() const;
};

// Entry (a, b) = |mask_a AND mask_b| / K. Throws HeterogeneousMasks unless
// every mask shares element class, layout and K.
OverlapMatrix mask_overlap(const std::map<std::string, IdentificationMask>& masks);

}  // namespace sadi
