#pragma once

// Minimal GPT-2-style decoder: learned positional embeddings, pre-norm
// blocks, causal multi-head attention, GELU (tanh) FFN, tied unembedding.
// The forward pass exposes read/write taps at the three element classes.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sadi/element.hpp"
#include "sadi/tensor_file.hpp"

namespace sadi {

using TokenId = std::uint32_t;

struct ModelSpec {
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t d_ff = 0;
  std::size_t vocab_size = 0;
  std::size_t max_positions = 0;
  float layernorm_epsilon = 1e-5f;

  std::size_t d_head() const { return n_heads ? d_model / n_heads : 0; }

  // Width of one layer's trace for the class (Head: all heads concatenated).
  std::size_t trace_width(ElementClass c) const;
  // Selectable units per layer (Head: n_heads; otherwise the trace width).
  std::size_t units_per_layer(ElementClass c) const;
  // Scalars governed by one unit (Head: d_head; otherwise 1).
  std::size_t unit_width(ElementClass c) const;

  // Throws Error{InvalidArgument} if counts are zero, heads do not divide
  // d_model, or epsilon is not positive.
  void validate() const;

  bool operator==(const ModelSpec&) const = default;
};

// JSON sidecar: {n_layers, d_model, n_heads, d_ff, vocab_size,
// max_positions, layernorm_epsilon}.
ModelSpec parse_model_spec(const std::string& json_text);
std::string model_spec_to_json(const ModelSpec& spec);
ModelSpec read_model_spec(const std::filesystem::path& path);

struct TensorRequirement {
  std::string name;
  std::vector<std::size_t> shape;
};

// Every tensor a WeightStore must hold, in a fixed order.
std::vector<TensorRequirement> required_tensors(const ModelSpec& spec);

struct LayerWeights {
  std::span<const float> ln1_gamma, ln1_beta;
  std::span<const float> attn_weight, attn_bias;  // [d, 3d], [3d]
  std::span<const float> proj_weight, proj_bias;  // [d, d], [d]
  std::span<const float> ln2_gamma, ln2_beta;
  std::span<const float> fc_weight, fc_bias;      // [d, d_ff], [d_ff]
  std::span<const float> out_weight, out_bias;    // [d_ff, d], [d]
};

// Validated, immutable weights. Safe to share across threads.
class WeightStore {
 public:
  // Throws MissingTensor / ShapeMismatch / MalformedContainer (non-finite).
  static WeightStore create(ModelSpec spec, TensorMap tensors);

  const ModelSpec& spec() const { return spec_; }
  const TensorMap& tensors() const { return tensors_; }
  const Tensor& tensor(const std::string& name) const;

  std::span<const float> token_embedding() const { return wte_; }
  std::span<const float> position_embedding() const { return wpe_; }
  std::span<const float> final_ln_gamma() const { return lnf_gamma_; }
  std::span<const float> final_ln_beta() const { return lnf_beta_; }
  const LayerWeights& layer(std::size_t l) const { return layers_[l]; }

  WeightStore(const WeightStore& other) : WeightStore(other.spec_, other.tensors_) {}
  WeightStore& operator=(const WeightStore& other);
  WeightStore(WeightStore&&) = default;
  WeightStore& operator=(WeightStore&&) = default;

 private:
  WeightStore(ModelSpec spec, TensorMap tensors);
  void bind();

  ModelSpec spec_;
  TensorMap tensors_;
  std::span<const float> wte_, wpe_, lnf_gamma_, lnf_beta_;
  std::vector<LayerWeights> layers_;
};

WeightStore load_model(const ModelSpec& spec, std::span<const std::byte> container);
// Reads <dir>/model.json and <dir>/model.safetensors.
WeightStore load_model_dir(const std::filesystem::path& dir);
void save_model_dir(const std::filesystem::path& dir, const WeightStore& weights);

struct ActivationTrace {
  ElementClass element_class = ElementClass::Hidden;
  std::vector<std::vector<float>> per_layer;
  std::size_t token_index = 0;
};

struct TapSite {
  ElementClass element_class;
  std::size_t layer;
  std::size_t position;
  // Tokens [0, prompt_length) are the prompt; later positions were generated
  // or belong to a scored continuation.
  std::size_t prompt_length;
};

// Write tap invoked once per (layer, position) at every site of the class it
// targets, before downstream computation reads the value.
class ActivationTap {
 public:
  virtual ~ActivationTap() = default;
  virtual bool targets(ElementClass c) const = 0;
  virtual void apply(const TapSite& site, std::span<float> activation) const = 0;
};

struct ForwardOptions {
  const ActivationTap* tap = nullptr;
  // 0 means "the whole sequence is prompt".
  std::size_t prompt_length = 0;
  // Keep every position's activations, not just the last token's.
  bool record_all_positions = false;
};

struct ForwardResult {
  std::size_t seq_len = 0;
  std::size_t vocab_size = 0;
  std::vector<float> logits;  // [seq_len x vocab_size]
  // Last-token activations per class, read after any tap has written them.
  std::array<ActivationTrace, 3> traces;
  // Input to layer 0 at the last position: wte[token] + wpe[pos].
  std::vector<float> embedding_last;
  // Filled only with record_all_positions: [class][layer] -> [seq x width].
  std::array<std::vector<std::vector<float>>, 3> all_positions;

  std::span<const float> logits_row(std::size_t pos) const {
    return std::span(logits).subspan(pos * vocab_size, vocab_size);
  }
  const ActivationTrace& trace(ElementClass c) const { return traces[class_index(c)]; }
};

// Throws SequenceTooLong (empty or > max_positions) and TokenOutOfRange.
ForwardResult forward(const WeightStore& weights, std::span<const TokenId> tokens,
                      const ForwardOptions& options = {});

// Appends argmax tokens; ties go to the lowest id. Any tap in options is
// applied on every step with prompt_length = prompt.size().
std::vector<TokenId> greedy_decode(const WeightStore& weights, std::span<const TokenId> prompt,
                                   std::size_t max_new, const ForwardOptions& options = {});

// Lowest index among the maximal entries.
std::size_t argmax_lowest(std::span<const float> values);

}  // namespace sadi
