#pragma once

// Test-side oracles that deliberately avoid the library's helpers.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sadi/mask.hpp"

namespace oracle {

// Score per unit: |v| for scalar units, sqrt of the in-order float sum of
// squares for head units.
inline std::vector<float> scores(const sadi::MeanDifference& m) {
  const std::size_t units = m.n_layers * m.units_per_layer;
  const std::size_t width = m.values.size() / units;
  std::vector<float> s(units);
  for (std::size_t u = 0; u < units; ++u) {
    if (m.element_class != sadi::ElementClass::Head) {
      s[u] = std::fabs(m.values[u]);
    } else {
      float acc = 0.0f;
      for (std::size_t c = 0; c < width; ++c) acc += m.values[u * width + c] * m.values[u * width + c];
      s[u] = std::sqrt(acc);
    }
  }
  return s;
}

// Full stable sort by descending score; ties keep ascending index order.
inline std::vector<std::uint8_t> top_k_bits(const std::vector<float>& s, std::size_t k) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
  std::vector<std::uint8_t> bits(s.size(), 0);
  for (std::size_t i = 0; i < k; ++i) bits[order[i]] = 1;
  return bits;
}

// Plain double accumulation in input order.
inline std::vector<double> mean(const std::vector<std::vector<std::vector<float>>>& instances) {
  std::vector<double> out;
  for (const auto& inst : instances) {
    std::size_t i = 0;
    for (const auto& layer : inst)
      for (float v : layer) {
        if (out.size() <= i) out.push_back(0.0);
        out[i++] += v;
      }
  }
  for (auto& v : out) v /= static_cast<double>(instances.size());
  return out;
}

}  // namespace oracle
