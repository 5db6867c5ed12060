#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sadi/element.hpp"

namespace sadi {

// Positive-minus-negative last-token activations of one contrastive pair.
struct InstanceDifference {
  std::string id;
  ElementClass element_class = ElementClass::Hidden;
  std::size_t units_per_layer = 0;
  std::vector<std::vector<float>> per_layer;
};

}  // namespace sadi
