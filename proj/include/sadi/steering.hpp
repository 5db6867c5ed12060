#pragma once

// Inference-time intervention on the tapped forward pass.
//   Adaptive: a' = a + delta * (a .* M)   (update follows the input itself)
//   Fixed:    a' = a + delta * (D .* M)   (D = mean difference, input-independent)
//   Off:      no-op

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sadi/mask.hpp"
#include "sadi/model.hpp"

namespace sadi {

enum class SteeringMode { Adaptive, Fixed, Off };
enum class PositionPolicy { AllPositions, LastPromptTokenOnward };

std::string_view steering_mode_name(SteeringMode m);
std::optional<SteeringMode> parse_steering_mode(std::string_view s);
std::string_view position_policy_name(PositionPolicy p);
std::optional<PositionPolicy> parse_position_policy(std::string_view s);

struct SteeringSpec {
  ElementClass element_class = ElementClass::Head;
  IdentificationMask mask;
  float delta = 0.0f;
  SteeringMode mode = SteeringMode::Off;
  std::optional<MeanDifference> fixed_direction;  // required iff mode == Fixed
  PositionPolicy positions = PositionPolicy::AllPositions;
};

// Broadcast one bit per unit over unit_width scalars.
std::vector<std::uint8_t> expand_units(std::span<const std::uint8_t> unit_bits,
                                       std::size_t unit_width);

// Both throw Error{LengthMismatch}. mask is already expanded to scalars.
std::vector<float> apply_adaptive(std::span<const float> activation,
                                  std::span<const std::uint8_t> mask, float delta);
std::vector<float> apply_fixed(std::span<const float> activation,
                               std::span<const std::uint8_t> mask, float delta,
                               std::span<const float> direction);

void apply_adaptive_inplace(std::span<float> activation, std::span<const std::uint8_t> mask,
                            float delta);
void apply_fixed_inplace(std::span<float> activation, std::span<const std::uint8_t> mask,
                         float delta, std::span<const float> direction);

// A SteeringSpec bound to a model layout, usable as a forward-pass tap.
// Immutable once built; one instance may serve concurrent forward calls.
class Intervention final : public ActivationTap {
 public:
  // Throws Error{LayoutMismatch} if the mask or direction does not fit the model.
  Intervention(SteeringSpec spec, const ModelSpec& model);

  bool targets(ElementClass c) const override;
  void apply(const TapSite& site, std::span<float> activation) const override;

  const SteeringSpec& spec() const { return spec_; }
  // Scalar-level mask of layer l.
  std::span<const std::uint8_t> layer_mask(std::size_t l) const { return expanded_[l]; }

 private:
  SteeringSpec spec_;
  std::vector<std::vector<std::uint8_t>> expanded_;
  std::vector<std::vector<float>> direction_;
};

Intervention install(const SteeringSpec& spec, const ModelSpec& model);

}  // namespace sadi
