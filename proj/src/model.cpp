#include "sadi/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"
#include "sadi/kernels.hpp"

namespace sadi {

using json = nlohmann::json;

std::size_t ModelSpec::trace_width(ElementClass c) const {
  switch (c) {
    case ElementClass::Hidden: return d_model;
    case ElementClass::Head: return n_heads * d_head();
    case ElementClass::Neuron: return d_ff;
  }
  return 0;
}

std::size_t ModelSpec::units_per_layer(ElementClass c) const {
  return c == ElementClass::Head ? n_heads : trace_width(c);
}

std::size_t ModelSpec::unit_width(ElementClass c) const {
  return c == ElementClass::Head ? d_head() : 1;
}

void ModelSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
  if (n_layers == 0 || d_model == 0 || n_heads == 0 || d_ff == 0 || vocab_size == 0 ||
      max_positions == 0)
    fail("model spec counts must all be >= 1");
  if (d_model % n_heads != 0) fail("n_heads must divide d_model");
  if (!(layernorm_epsilon > 0.0f) || !std::isfinite(layernorm_epsilon))
    fail("layernorm_epsilon must be positive");
}

ModelSpec parse_model_spec(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedDataset, std::string("model spec is not valid JSON: ") + e.what());
  }
  ModelSpec s;
  auto count = [&](const char* key) -> std::size_t {
    if (!j.contains(key)) throw Error(ErrorKind::MissingRequired, key);
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw Error(ErrorKind::TypeError, std::string(key) + " must be a non-negative integer");
    return v.get<std::size_t>();
  };
  s.n_layers = count("n_layers");
  s.d_model = count("d_model");
  s.n_heads = count("n_heads");
  s.d_ff = count("d_ff");
  s.vocab_size = count("vocab_size");
  s.max_positions = count("max_positions");
  if (j.contains("layernorm_epsilon")) {
    if (!j.at("layernorm_epsilon").is_number())
      throw Error(ErrorKind::TypeError, "layernorm_epsilon must be a number");
    s.layernorm_epsilon = j.at("layernorm_epsilon").get<float>();
  }
  s.validate();
  return s;
}

std::string model_spec_to_json(const ModelSpec& s) {
  json j = {{"n_layers", s.n_layers},     {"d_model", s.d_model},
            {"n_heads", s.n_heads},       {"d_ff", s.d_ff},
            {"vocab_size", s.vocab_size}, {"max_positions", s.max_positions},
            {"layernorm_epsilon", s.layernorm_epsilon}};
  return j.dump(2);
}

ModelSpec read_model_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_spec(ss.str());
}

std::vector<TensorRequirement> required_tensors(const ModelSpec& s) {
  const std::size_t d = s.d_model;
  std::vector<TensorRequirement> req = {
      {"wte", {s.vocab_size, d}},
      {"wpe", {s.max_positions, d}},
  };
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    req.push_back({p + "ln_1.weight", {d}});
    req.push_back({p + "ln_1.bias", {d}});
    req.push_back({p + "attn.c_attn.weight", {d, 3 * d}});
    req.push_back({p + "attn.c_attn.bias", {3 * d}});
    req.push_back({p + "attn.c_proj.weight", {d, d}});
    req.push_back({p + "attn.c_proj.bias", {d}});
    req.push_back({p + "ln_2.weight", {d}});
    req.push_back({p + "ln_2.bias", {d}});
    req.push_back({p + "mlp.c_fc.weight", {d, s.d_ff}});
    req.push_back({p + "mlp.c_fc.bias", {s.d_ff}});
    req.push_back({p + "mlp.c_proj.weight", {s.d_ff, d}});
    req.push_back({p + "mlp.c_proj.bias", {d}});
  }
  req.push_back({"ln_f.weight", {d}});
  req.push_back({"ln_f.bias", {d}});
  return req;
}

WeightStore WeightStore::create(ModelSpec spec, TensorMap tensors) {
  spec.validate();
  for (const auto& r : required_tensors(spec)) {
    auto it = tensors.find(r.name);
    if (it == tensors.end()) throw Error(ErrorKind::MissingTensor, r.name);
    if (it->second.shape != r.shape)
      throw Error(ErrorKind::ShapeMismatch, r.name + ": expected " + shape_to_string(r.shape) +
                                                ", got " + it->second.shape_string());
    for (float v : it->second.data)
      if (!std::isfinite(v))
        throw Error(ErrorKind::MalformedContainer, r.name + " contains NaN or Inf");
  }
  return WeightStore(std::move(spec), std::move(tensors));
}

WeightStore::WeightStore(ModelSpec spec, TensorMap tensors)
    : spec_(std::move(spec)), tensors_(std::move(tensors)) {
  bind();
}

WeightStore& WeightStore::operator=(const WeightStore& other) {
  if (this != &other) {
    spec_ = other.spec_;
    tensors_ = other.tensors_;
    bind();
  }
  return *this;
}

const Tensor& WeightStore::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw Error(ErrorKind::MissingTensor, name);
  return it->second;
}

void WeightStore::bind() {
  auto view = [&](const std::string& name) { return std::span<const float>(tensor(name).data); };
  wte_ = view("wte");
  wpe_ = view("wpe");
  lnf_gamma_ = view("ln_f.weight");
  lnf_beta_ = view("ln_f.bias");
  layers_.clear();
  for (std::size_t l = 0; l < spec_.n_layers; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    layers_.push_back(LayerWeights{
        view(p + "ln_1.weight"), view(p + "ln_1.bias"),
        view(p + "attn.c_attn.weight"), view(p + "attn.c_attn.bias"),
        view(p + "attn.c_proj.weight"), view(p + "attn.c_proj.bias"),
        view(p + "ln_2.weight"), view(p + "ln_2.bias"),
        view(p + "mlp.c_fc.weight"), view(p + "mlp.c_fc.bias"),
        view(p + "mlp.c_proj.weight"), view(p + "mlp.c_proj.bias")});
  }
}

WeightStore load_model(const ModelSpec& spec, std::span<const std::byte> container) {
  auto parsed = parse_tensor_container(container);
  return WeightStore::create(spec, std::move(parsed.tensors));
}

WeightStore load_model_dir(const std::filesystem::path& dir) {
  const auto spec = read_model_spec(dir / "model.json");
  auto parsed = read_tensor_file(dir / "model.safetensors");
  return WeightStore::create(spec, std::move(parsed.tensors));
}

void save_model_dir(const std::filesystem::path& dir, const WeightStore& weights) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "model.json");
    if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + (dir / "model.json").string());
    out << model_spec_to_json(weights.spec()) << '\n';
  }
  TensorContainer c;
  c.tensors = weights.tensors();
  write_tensor_file(dir / "model.safetensors", c);
}

namespace {

void run_tap(const ForwardOptions& opt, ElementClass c, std::size_t layer, std::span<float> rows,
             std::size_t seq, std::size_t width) {
  if (!opt.tap || !opt.tap->targets(c)) return;
  const std::size_t prompt_length = opt.prompt_length ? opt.prompt_length : seq;
  for (std::size_t pos = 0; pos < seq; ++pos)
    opt.tap->apply(TapSite{c, layer, pos, prompt_length}, rows.subspan(pos * width, width));
}

void record(ForwardResult& out, const ForwardOptions& opt, ElementClass c,
            std::span<const float> rows, std::size_t seq, std::size_t width) {
  const auto last = rows.subspan((seq - 1) * width, width);
  out.traces[class_index(c)].per_layer.emplace_back(last.begin(), last.end());
  if (opt.record_all_positions)
    out.all_positions[class_index(c)].emplace_back(rows.begin(), rows.end());
}

}  // namespace

ForwardResult forward(const WeightStore& weights, std::span<const TokenId> tokens,
                      const ForwardOptions& opt) {
  const ModelSpec& s = weights.spec();
  const std::size_t seq = tokens.size();
  if (seq == 0) throw Error(ErrorKind::SequenceTooLong, "empty token sequence");
  if (seq > s.max_positions)
    throw Error(ErrorKind::SequenceTooLong, "sequence of " + std::to_string(seq) +
                                                " tokens exceeds max_positions " +
                                                std::to_string(s.max_positions));
  for (std::size_t i = 0; i < seq; ++i)
    if (tokens[i] >= s.vocab_size)
      throw Error(ErrorKind::TokenOutOfRange, "token " + std::to_string(tokens[i]) +
                                                  " at position " + std::to_string(i) +
                                                  " >= vocab_size " + std::to_string(s.vocab_size));

  const std::size_t d = s.d_model;
  const std::size_t ff = s.d_ff;
  const float eps = s.layernorm_epsilon;

  ForwardResult out;
  out.seq_len = seq;
  out.vocab_size = s.vocab_size;
  for (auto c : kAllElementClasses) {
    auto& t = out.traces[class_index(c)];
    t.element_class = c;
    t.token_index = seq - 1;
    t.per_layer.reserve(s.n_layers);
  }

  std::vector<float> x(seq * d);
  const auto wte = weights.token_embedding();
  const auto wpe = weights.position_embedding();
  for (std::size_t i = 0; i < seq; ++i)
    for (std::size_t k = 0; k < d; ++k) x[i * d + k] = wte[tokens[i] * d + k] + wpe[i * d + k];
  out.embedding_last.assign(x.end() - static_cast<std::ptrdiff_t>(d), x.end());

  std::vector<float> normed(seq * d), qkv(seq * 3 * d), heads(seq * d), proj(seq * d);
  std::vector<float> hidden(seq * ff);

  for (std::size_t l = 0; l < s.n_layers; ++l) {
    const LayerWeights& w = weights.layer(l);

    kernels::layer_norm(normed, x, w.ln1_gamma, w.ln1_beta, seq, d, eps);
    kernels::linear(qkv, normed, w.attn_weight, w.attn_bias, seq, d, 3 * d);
    kernels::causal_attention(heads, qkv, seq, s.n_heads, s.d_head());
    run_tap(opt, ElementClass::Head, l, heads, seq, d);
    record(out, opt, ElementClass::Head, heads, seq, d);
    kernels::linear(proj, heads, w.proj_weight, w.proj_bias, seq, d, d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

    kernels::layer_norm(normed, x, w.ln2_gamma, w.ln2_beta, seq, d, eps);
    kernels::linear(hidden, normed, w.fc_weight, w.fc_bias, seq, d, ff);
    kernels::gelu_inplace(hidden);
    run_tap(opt, ElementClass::Neuron, l, hidden, seq, ff);
    record(out, opt, ElementClass::Neuron, hidden, seq, ff);
    kernels::linear(proj, hidden, w.out_weight, w.out_bias, seq, ff, d);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += proj[i];

    run_tap(opt, ElementClass::Hidden, l, x, seq, d);
    record(out, opt, ElementClass::Hidden, x, seq, d);
  }

  kernels::layer_norm(normed, x, weights.final_ln_gamma(), weights.final_ln_beta(), seq, d, eps);
  out.logits.resize(seq * s.vocab_size);
  kernels::linear_transposed(out.logits, normed, wte, seq, d, s.vocab_size);
  return out;
}

std::size_t argmax_lowest(std::span<const float> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::vector<TokenId> greedy_decode(const WeightStore& weights, std::span<const TokenId> prompt,
                                   std::size_t max_new, const ForwardOptions& options) {
  if (prompt.empty()) throw Error(ErrorKind::SequenceTooLong, "empty prompt");
  if (prompt.size() + max_new > weights.spec().max_positions)
    throw Error(ErrorKind::SequenceTooLong,
                "prompt length " + std::to_string(prompt.size()) + " + max_new " +
                    std::to_string(max_new) + " exceeds max_positions " +
                    std::to_string(weights.spec().max_positions));
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  ForwardOptions opt = options;
  opt.prompt_length = prompt.size();
  opt.record_all_positions = false;
  for (std::size_t step = 0; step < max_new; ++step) {
    const auto result = forward(weights, seq, opt);
    seq.push_back(static_cast<TokenId>(argmax_lowest(result.logits_row(seq.size() - 1))));
  }
  return seq;
}

}  // namespace sadi
