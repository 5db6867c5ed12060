#include "sadi/planted.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <string>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi::planted {

namespace {

constexpr std::array<const char*, 4> kPositiveCues = {" sun", " gold", " warm", " bright"};
constexpr std::array<const char*, 4> kNegativeCues = {" ice", " dark", " cold", " grey"};

// Residual-stream feature directions.
enum Feature : std::size_t {
  kShared = 0,     // every token
  kKeyGate = 1,    // cue words and <s>
  kCuePolarity = 2,
  kAnswerPolarity = 3,
  kIsAnswer = 4,
  kDistractor = 5,
  kOk = 6,         // written by the planted head, read by " ."
  kCueVsSink = 7,  // +1 cue, -1 <s>
  kFirstIdentity = 8,
};

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }
  // Box-Muller; avoids implementation-defined std::normal_distribution.
  float normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return static_cast<float>(std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2));
  }

 private:
  std::mt19937_64 engine_;
};

using Vec = std::array<float, kDModel>;

// Orthonormal basis of the zero-mean subspace, so LayerNorm's centering
// leaves every feature untouched.
std::vector<Vec> zero_mean_basis(Rng& rng) {
  std::vector<Vec> basis;
  while (basis.size() < kDModel - 1) {
    Vec v;
    for (auto& x : v) x = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      double mean = 0.0;
      for (float x : v) mean += x;
      mean /= kDModel;
      for (auto& x : v) x = static_cast<float>(x - mean);
      for (const auto& b : basis) {
        double dot = 0.0;
        for (std::size_t i = 0; i < kDModel; ++i) dot += double(v[i]) * b[i];
        for (std::size_t i = 0; i < kDModel; ++i) v[i] = static_cast<float>(v[i] - dot * b[i]);
      }
    }
    double norm = 0.0;
    for (float x : v) norm += double(x) * x;
    norm = std::sqrt(norm);
    if (norm < 1e-3) continue;
    for (auto& x : v) x = static_cast<float>(x / norm);
    basis.push_back(v);
  }
  return basis;
}

struct Vocab {
  std::unordered_map<std::string, TokenId> ids;
  TokenId next = 0;
  TokenId add(const std::string& piece) {
    ids.emplace(piece, next);
    return next++;
  }
};

std::string filler_word(std::size_t i) {
  std::string s = " w";
  if (i < 10) s += '0';
  return s + std::to_string(i);
}

Vocab make_vocab() {
  Vocab v;
  for (int b = 0; b < 256; ++b) v.add(Tokenizer::byte_token(static_cast<unsigned char>(b)));
  v.add("<s>");
  for (std::size_t i = 0; i < kFillers; ++i) v.add(filler_word(i));
  for (auto* c : kPositiveCues) v.add(c);
  for (auto* c : kNegativeCues) v.add(c);
  v.add(" yes");
  v.add(" no");
  v.add(" .");
  return v;
}

struct Question {
  std::string text;
  bool positive;
};

Question make_question(Rng& rng, bool positive) {
  std::string text = "<s>";
  const std::size_t before = 1 + rng.below(3);
  const std::size_t after = 1 + rng.below(3);
  for (std::size_t i = 0; i < before; ++i) text += filler_word(rng.below(kFillers));
  text += positive ? kPositiveCues[rng.below(4)] : kNegativeCues[rng.below(4)];
  for (std::size_t i = 0; i < after; ++i) text += filler_word(rng.below(kFillers));
  return {text, positive};
}

}  // namespace

ModelSpec model_spec() {
  ModelSpec s;
  s.n_layers = kLayers;
  s.d_model = kDModel;
  s.n_heads = kHeads;
  s.d_ff = kDff;
  s.vocab_size = make_vocab().next;
  s.max_positions = kMaxPositions;
  s.layernorm_epsilon = 1e-5f;
  return s;
}

std::size_t planted_unit(const Config& config) {
  return config.planted_layer * kHeads + config.planted_head;
}

PromptTemplate prompt_template() { return builtin_template("mc"); }

ModelBundle build_model(const Config& cfg) {
  const ModelSpec spec = model_spec();
  const std::size_t d = kDModel;
  const std::size_t dh = spec.d_head();
  Rng rng(cfg.seed);
  const auto basis = zero_mean_basis(rng);
  const Vocab vocab = make_vocab();

  TensorMap t;
  auto noise = [&](std::vector<std::size_t> shape, float scale) {
    Tensor x{std::move(shape), {}};
    x.data.resize(x.numel());
    for (auto& v : x.data) v = scale * rng.normal();
    return x;
  };
  auto constant = [](std::size_t n, float value) { return Tensor{{n}, std::vector<float>(n, value)}; };

  // Token embeddings.
  Tensor wte{{spec.vocab_size, d}, std::vector<float>(spec.vocab_size * d, 0.0f)};
  auto add = [&](TokenId id, std::size_t feature, float amount) {
    for (std::size_t i = 0; i < d; ++i) wte.data[id * d + i] += amount * basis[feature][i];
  };
  for (TokenId id = 0; id < spec.vocab_size; ++id) {
    add(id, kShared, cfg.residual_norm);
    for (std::size_t f = kFirstIdentity; f < basis.size(); ++f) add(id, f, cfg.identity_scale * rng.normal());
  }
  const auto& ids = vocab.ids;
  add(ids.at("<s>"), kKeyGate, 1.0f);
  add(ids.at("<s>"), kCueVsSink, -1.0f);
  for (auto* c : kPositiveCues) {
    add(ids.at(c), kKeyGate, 1.0f);
    add(ids.at(c), kCuePolarity, 1.0f);
    add(ids.at(c), kCueVsSink, 1.0f);
  }
  for (auto* c : kNegativeCues) {
    add(ids.at(c), kKeyGate, 1.0f);
    add(ids.at(c), kCuePolarity, -1.0f);
    add(ids.at(c), kCueVsSink, 1.0f);
  }
  for (std::size_t i = 0; i < kFillers; ++i)
    add(ids.at(filler_word(i)), kDistractor,
        cfg.filler_distractor * static_cast<float>(2.0 * rng.uniform() - 1.0));
  add(ids.at(" yes"), kAnswerPolarity, 1.0f);
  add(ids.at(" yes"), kIsAnswer, 1.0f);
  add(ids.at(" yes"), kDistractor, cfg.answer_distractor);
  add(ids.at(" no"), kAnswerPolarity, -1.0f);
  add(ids.at(" no"), kIsAnswer, 1.0f);
  add(ids.at(" no"), kDistractor, -cfg.answer_distractor);
  add(ids.at(" ."), kOk, cfg.period_gain);
  add(ids.at(" ."), kShared, cfg.period_bias);
  t.emplace("wte", std::move(wte));
  t.emplace("wpe", noise({spec.max_positions, d}, cfg.weight_noise));

  for (std::size_t l = 0; l < kLayers; ++l) {
    const std::string p = "h." + std::to_string(l) + ".";
    t.emplace(p + "ln_1.weight", constant(d, 1.0f));
    t.emplace(p + "ln_1.bias", constant(d, 0.0f));
    Tensor attn = noise({d, 3 * d}, cfg.weight_noise);
    Tensor proj = noise({d, d}, cfg.weight_noise);
    if (l == cfg.planted_layer) {
      const std::size_t q0 = cfg.planted_head * dh;
      const std::size_t k0 = d + q0;
      const std::size_t v0 = 2 * d + q0;
      for (std::size_t r = 0; r < d; ++r) {
        attn.data[r * 3 * d + q0] += cfg.query_gate * basis[kIsAnswer][r];
        attn.data[r * 3 * d + q0 + 1] += cfg.query_agree * basis[kAnswerPolarity][r];
        attn.data[r * 3 * d + k0] += basis[kKeyGate][r];
        attn.data[r * 3 * d + k0 + 1] += basis[kCuePolarity][r];
        attn.data[r * 3 * d + v0] += cfg.value_scale * basis[kCueVsSink][r];
        proj.data[q0 * d + r] += cfg.output_scale * basis[kOk][r];
      }
    }
    t.emplace(p + "attn.c_attn.weight", std::move(attn));
    t.emplace(p + "attn.c_attn.bias", constant(3 * d, 0.0f));
    t.emplace(p + "attn.c_proj.weight", std::move(proj));
    t.emplace(p + "attn.c_proj.bias", constant(d, 0.0f));
    t.emplace(p + "ln_2.weight", constant(d, 1.0f));
    t.emplace(p + "ln_2.bias", constant(d, 0.0f));
    t.emplace(p + "mlp.c_fc.weight", noise({d, kDff}, cfg.weight_noise));
    t.emplace(p + "mlp.c_fc.bias", constant(kDff, 0.0f));
    t.emplace(p + "mlp.c_proj.weight", noise({kDff, d}, cfg.weight_noise));
    t.emplace(p + "mlp.c_proj.bias", constant(d, 0.0f));
  }
  t.emplace("ln_f.weight", constant(d, 1.0f));
  t.emplace("ln_f.bias", constant(d, 0.0f));

  return ModelBundle{WeightStore::create(spec, std::move(t)), Tokenizer(vocab.ids)};
}

std::vector<MCItem> mc_items(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MCItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = make_question(rng, i % 2 == 0);
    MCItem item;
    item.id = "mc-" + std::to_string(i);
    item.question = q.text;
    const bool yes_first = rng.below(2) == 0;
    item.options = yes_first ? std::vector<std::string>{"yes .", "no ."}
                             : std::vector<std::string>{"no .", "yes ."};
    item.gold_index = (q.positive == yes_first) ? 0 : 1;
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ContrastivePair> contrastive_pairs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<ContrastivePair> pairs;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = make_question(rng, i % 2 == 0);
    pairs.push_back({"pair-" + std::to_string(i), q.text, q.positive ? "yes" : "no",
                     q.positive ? "no" : "yes"});
  }
  return pairs;
}

std::vector<QAItem> qa_items(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<QAItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = make_question(rng, i % 2 == 0);
    items.push_back({"qa-" + std::to_string(i), q.text, {q.positive ? "yes" : "no"}});
  }
  return items;
}

namespace {

void write_lines(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

}  // namespace

void write_fixture(const std::filesystem::path& dir, const Config& config, const FixtureSizes& sizes) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  save_bundle(dir / "model", build_model(config));

  std::vector<nlohmann::json> rows;
  for (const auto& p : contrastive_pairs(sizes.pairs, sizes.pair_seed))
    rows.push_back({{"id", p.id}, {"question", p.question}, {"positive", p.positive}, {"negative", p.negative}});
  write_lines(dir / "pairs.jsonl", rows);

  rows.clear();
  for (const auto& it : mc_items(sizes.mc, sizes.mc_seed))
    rows.push_back({{"id", it.id}, {"question", it.question}, {"options", it.options}, {"gold_index", it.gold_index}});
  write_lines(dir / "mc.jsonl", rows);

  rows.clear();
  for (const auto& it : qa_items(sizes.qa, sizes.qa_seed))
    rows.push_back({{"id", it.id}, {"question", it.question}, {"answers", it.answers}});
  write_lines(dir / "qa.jsonl", rows);
}

}  // namespace sadi::planted
