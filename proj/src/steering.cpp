#include "sadi/steering.hpp"

#include "sadi/error.hpp"

namespace sadi {

std::string_view steering_mode_name(SteeringMode m) {
  switch (m) {
    case SteeringMode::Adaptive: return "adaptive";
    case SteeringMode::Fixed: return "fixed";
    case SteeringMode::Off: return "off";
  }
  return "off";
}

std::optional<SteeringMode> parse_steering_mode(std::string_view s) {
  for (auto m : {SteeringMode::Adaptive, SteeringMode::Fixed, SteeringMode::Off})
    if (steering_mode_name(m) == s) return m;
  return std::nullopt;
}

std::string_view position_policy_name(PositionPolicy p) {
  return p == PositionPolicy::AllPositions ? "all" : "last-prompt-onward";
}

std::optional<PositionPolicy> parse_position_policy(std::string_view s) {
  for (auto p : {PositionPolicy::AllPositions, PositionPolicy::LastPromptTokenOnward})
    if (position_policy_name(p) == s) return p;
  return std::nullopt;
}

std::vector<std::uint8_t> expand_units(std::span<const std::uint8_t> unit_bits,
                                       std::size_t unit_width) {
  std::vector<std::uint8_t> out;
  out.reserve(unit_bits.size() * unit_width);
  for (auto b : unit_bits) out.insert(out.end(), unit_width, b);
  return out;
}

void apply_adaptive_inplace(std::span<float> a, std::span<const std::uint8_t> mask, float delta) {
  if (a.size() != mask.size())
    throw Error(ErrorKind::LengthMismatch, "activation length " + std::to_string(a.size()) +
                                               " != mask length " + std::to_string(mask.size()));
  for (std::size_t m = 0; m < a.size(); ++m)
    if (mask[m]) a[m] = a[m] + delta * a[m];
}

void apply_fixed_inplace(std::span<float> a, std::span<const std::uint8_t> mask, float delta,
                         std::span<const float> direction) {
  if (a.size() != mask.size() || a.size() != direction.size())
    throw Error(ErrorKind::LengthMismatch,
                "activation/mask/direction lengths " + std::to_string(a.size()) + "/" +
                    std::to_string(mask.size()) + "/" + std::to_string(direction.size()) +
                    " disagree");
  for (std::size_t m = 0; m < a.size(); ++m)
    if (mask[m]) a[m] = a[m] + delta * direction[m];
}

std::vector<float> apply_adaptive(std::span<const float> activation,
                                  std::span<const std::uint8_t> mask, float delta) {
  std::vector<float> out(activation.begin(), activation.end());
  apply_adaptive_inplace(out, mask, delta);
  return out;
}

std::vector<float> apply_fixed(std::span<const float> activation,
                               std::span<const std::uint8_t> mask, float delta,
                               std::span<const float> direction) {
  std::vector<float> out(activation.begin(), activation.end());
  apply_fixed_inplace(out, mask, delta, direction);
  return out;
}

Intervention::Intervention(SteeringSpec spec, const ModelSpec& model) : spec_(std::move(spec)) {
  if (spec_.mode == SteeringMode::Off) return;
  const ElementClass c = spec_.element_class;
  const auto& m = spec_.mask;
  auto mismatch = [](const std::string& what) { throw Error(ErrorKind::LayoutMismatch, what); };
  if (m.element_class != c) mismatch("mask element class differs from steering element class");
  if (m.unit != unit_kind_for(c)) mismatch("mask unit kind does not match element class");
  if (m.n_layers != model.n_layers)
    mismatch("mask has " + std::to_string(m.n_layers) + " layers, model has " +
             std::to_string(model.n_layers));
  if (m.units_per_layer != model.units_per_layer(c))
    mismatch("mask has " + std::to_string(m.units_per_layer) + " units per layer, model has " +
             std::to_string(model.units_per_layer(c)));
  if (m.bits.size() != m.total_units()) mismatch("mask bit vector has the wrong length");

  const std::size_t width = model.trace_width(c);
  for (std::size_t l = 0; l < model.n_layers; ++l)
    expanded_.push_back(expand_units(m.layer_bits(l), model.unit_width(c)));

  if (spec_.mode == SteeringMode::Fixed) {
    if (!spec_.fixed_direction) mismatch("fixed steering requires a direction");
    const auto& d = *spec_.fixed_direction;
    if (d.element_class != c || d.n_layers != model.n_layers || d.layer_width != width ||
        d.values.size() != model.n_layers * width)
      mismatch("fixed direction layout does not match the model");
    for (std::size_t l = 0; l < model.n_layers; ++l) {
      auto slice = d.layer(l);
      direction_.emplace_back(slice.begin(), slice.end());
    }
  }
}

bool Intervention::targets(ElementClass c) const {
  return spec_.mode != SteeringMode::Off && c == spec_.element_class;
}

void Intervention::apply(const TapSite& site, std::span<float> activation) const {
  if (!targets(site.element_class)) return;
  if (spec_.positions == PositionPolicy::LastPromptTokenOnward &&
      site.position + 1 < site.prompt_length)
    return;
  const auto& mask = expanded_[site.layer];
  if (spec_.mode == SteeringMode::Adaptive)
    apply_adaptive_inplace(activation, mask, spec_.delta);
  else
    apply_fixed_inplace(activation, mask, spec_.delta, direction_[site.layer]);
}

Intervention install(const SteeringSpec& spec, const ModelSpec& model) {
  return Intervention(spec, model);
}

}  // namespace sadi
