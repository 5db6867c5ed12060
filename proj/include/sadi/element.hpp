#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace sadi {

// The three intervention sites inside a block.
//   Hidden: residual stream after the full block (d_model wide).
//   Head:   per-head attention outputs before the output projection,
//           concatenated (n_heads units of d_head scalars each).
//   Neuron: FFN activations right after GELU (d_ff wide).
enum class ElementClass { Hidden = 0, Head = 1, Neuron = 2 };

inline constexpr std::array<ElementClass, 3> kAllElementClasses = {
    ElementClass::Hidden, ElementClass::Head, ElementClass::Neuron};

inline constexpr std::string_view element_class_name(ElementClass c) {
  switch (c) {
    case ElementClass::Hidden: return "hidden";
    case ElementClass::Head: return "head";
    case ElementClass::Neuron: return "neuron";
  }
  return "hidden";
}

inline std::optional<ElementClass> parse_element_class(std::string_view s) {
  for (auto c : kAllElementClasses)
    if (element_class_name(c) == s) return c;
  return std::nullopt;
}

inline constexpr std::size_t class_index(ElementClass c) {
  return static_cast<std::size_t>(c);
}

}  // namespace sadi
