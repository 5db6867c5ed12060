#include <cmath>
#include <cstring>
#include <random>

#include "doctest.h"
#include "reference_model.hpp"
#include "sadi/error.hpp"
#include "sadi/mask.hpp"
#include "sadi/planted.hpp"
#include "sadi/steering.hpp"
#include "support.hpp"

using namespace sadi;

namespace {

ErrorKind create_error(const ModelSpec& spec, TensorMap tensors) {
  try {
    WeightStore::create(spec, std::move(tensors));
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

bool same_bits(std::span<const float> a, std::span<const float> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

class ScaleAll final : public ActivationTap {
 public:
  explicit ScaleAll(float s) : s_(s) {}
  bool targets(ElementClass c) const override { return c == ElementClass::Head; }
  void apply(const TapSite&, std::span<float> a) const override {
    for (auto& v : a) v *= s_;
  }

 private:
  float s_;
};

}  // namespace

TEST_SUITE("model") {
  TEST_CASE("model spec validation and sidecar round trip") {
    auto spec = testing::tiny_spec();
    CHECK_NOTHROW(spec.validate());
    CHECK(parse_model_spec(model_spec_to_json(spec)) == spec);
    auto bad = spec;
    bad.n_heads = 3;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = spec;
    bad.layernorm_epsilon = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK(spec.trace_width(ElementClass::Hidden) == 8);
    CHECK(spec.trace_width(ElementClass::Head) == 8);
    CHECK(spec.trace_width(ElementClass::Neuron) == 16);
    CHECK(spec.units_per_layer(ElementClass::Head) == 2);
    CHECK(spec.unit_width(ElementClass::Head) == 4);
  }

  TEST_CASE("load errors name the offending tensor") {
    const auto spec = testing::tiny_spec();
    auto tensors = testing::random_tensors(spec, 1);
    CHECK_NOTHROW(WeightStore::create(spec, tensors));

    auto missing = tensors;
    missing.erase("h.0.attn.c_attn.weight");
    try {
      WeightStore::create(spec, missing);
      FAIL("expected MissingTensor");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingTensor);
      CHECK(std::string(e.what()).find("h.0.attn.c_attn.weight") != std::string::npos);
    }

    auto transposed = tensors;
    std::swap(transposed["wte"].shape[0], transposed["wte"].shape[1]);
    try {
      WeightStore::create(spec, transposed);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
      const std::string msg = e.what();
      CHECK(msg.find("wte") != std::string::npos);
      CHECK(msg.find("[20, 8]") != std::string::npos);
      CHECK(msg.find("[8, 20]") != std::string::npos);
    }

    auto nan = tensors;
    nan["ln_f.bias"].data[0] = NAN;
    CHECK(create_error(spec, nan) == ErrorKind::MalformedContainer);
  }

  TEST_CASE("container load and directory round trip") {
    const auto spec = testing::tiny_spec();
    const auto w = testing::random_model(spec, 2);
    const auto bytes = serialize_tensor_container({w.tensors(), {}});
    const auto loaded = load_model(spec, bytes);
    const std::vector<TokenId> toks = {1, 2, 3};
    CHECK(same_bits(forward(w, toks).logits, forward(loaded, toks).logits));

    testing::TempDir dir;
    save_model_dir(dir.path(), w);
    const auto again = load_model_dir(dir.path());
    CHECK(again.spec() == spec);
    CHECK(same_bits(forward(w, toks).logits, forward(again, toks).logits));
  }

  TEST_CASE("single token embedding is wte row plus position row 0") {
    const auto spec = testing::tiny_spec();
    const auto w = testing::random_model(spec, 3);
    for (TokenId t : {0u, 5u, 19u}) {
      const std::vector<TokenId> toks = {t};
      const auto r = forward(w, toks);
      REQUIRE(r.embedding_last.size() == spec.d_model);
      for (std::size_t k = 0; k < spec.d_model; ++k)
        CHECK(r.embedding_last[k] == w.token_embedding()[t * spec.d_model + k] + w.position_embedding()[k]);
    }
  }

  TEST_CASE("input validation") {
    const auto spec = testing::tiny_spec();
    const auto w = testing::random_model(spec, 4);
    std::vector<TokenId> too_long(spec.max_positions + 1, 0);
    CHECK_THROWS_AS(forward(w, too_long), Error);
    try {
      forward(w, std::vector<TokenId>{});
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::SequenceTooLong);
    }
    try {
      forward(w, std::vector<TokenId>{1, 20});
      FAIL("expected TokenOutOfRange");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::TokenOutOfRange);
    }
  }

  TEST_CASE("reference oracle parity on random models") {
    std::mt19937_64 rng(11);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto spec = testing::tiny_spec();
      const auto tensors = testing::random_tensors(spec, 100 + seed);
      const auto w = WeightStore::create(spec, tensors);
      const auto toks = testing::random_tokens(rng, 6, spec.vocab_size);
      ForwardOptions opt;
      opt.record_all_positions = true;
      const auto r = forward(w, toks, opt);
      const auto o = ref::forward(spec, tensors, toks);
      double worst = 0;
      for (std::size_t p = 0; p < toks.size(); ++p)
        for (std::size_t v = 0; v < spec.vocab_size; ++v)
          worst = std::max(worst, std::abs(r.logits_row(p)[v] - o.logits[p][v]));
      CHECK(worst <= 1e-4);
      for (auto c : kAllElementClasses)
        for (std::size_t l = 0; l < spec.n_layers; ++l) {
          const auto& all = r.all_positions[class_index(c)][l];
          const std::size_t width = spec.trace_width(c);
          REQUIRE(all.size() == toks.size() * width);
          for (std::size_t p = 0; p < toks.size(); ++p)
            for (std::size_t k = 0; k < width; ++k)
              CHECK(all[p * width + k] == doctest::Approx(o.sites[class_index(c)][l][p][k]).epsilon(1e-4));
        }
    }
  }

  TEST_CASE("traces have the spec-derived widths and read the last token") {
    const auto spec = testing::tiny_spec();
    const auto w = testing::random_model(spec, 5);
    const std::vector<TokenId> toks = {3, 1, 4, 1, 5};
    ForwardOptions opt;
    opt.record_all_positions = true;
    const auto r = forward(w, toks, opt);
    for (auto c : kAllElementClasses) {
      const auto& tr = r.trace(c);
      CHECK(tr.element_class == c);
      CHECK(tr.token_index == toks.size() - 1);
      REQUIRE(tr.per_layer.size() == spec.n_layers);
      const std::size_t width = spec.trace_width(c);
      for (std::size_t l = 0; l < spec.n_layers; ++l) {
        REQUIRE(tr.per_layer[l].size() == width);
        const auto& all = r.all_positions[class_index(c)][l];
        CHECK(same_bits(tr.per_layer[l], std::span(all).subspan((toks.size() - 1) * width, width)));
      }
    }
  }

  TEST_CASE("forward is pure and a no-op tap changes nothing") {
    const auto spec = testing::tiny_spec();
    const auto w = testing::random_model(spec, 6);
    const std::vector<TokenId> toks = {2, 7, 1, 8};
    const auto a = forward(w, toks);
    const auto b = forward(w, toks);
    CHECK(same_bits(a.logits, b.logits));
    for (auto c : kAllElementClasses)
      for (std::size_t l = 0; l < spec.n_layers; ++l)
        CHECK(same_bits(a.trace(c).per_layer[l], b.trace(c).per_layer[l]));

    const ScaleAll identity(1.0f);
    ForwardOptions opt;
    opt.tap = &identity;
    CHECK(same_bits(a.logits, forward(w, toks, opt).logits));
    const ScaleAll doubling(2.0f);
    opt.tap = &doubling;
    const auto c = forward(w, toks, opt);
    CHECK_FALSE(same_bits(a.logits, c.logits));
    // traces record the value after the tap wrote it
    for (std::size_t k = 0; k < spec.d_model; ++k)
      CHECK(c.trace(ElementClass::Head).per_layer[0][k] == 2.0f * a.trace(ElementClass::Head).per_layer[0][k]);
  }

  TEST_CASE("greedy decode") {
    const auto spec = testing::tiny_spec();
    const std::vector<TokenId> prompt = {1, 2, 3};

    SUBCASE("max_new = 0 returns the prompt") {
      const auto w = testing::random_model(spec, 7);
      CHECK(greedy_decode(w, prompt, 0) == prompt);
    }
    SUBCASE("constant argmax model repeats token 7") {
      auto t = testing::random_tensors(spec, 8);
      // final norm output is the constant vector e0, and only row 7 has a
      // positive e0 component
      std::fill(t["ln_f.weight"].data.begin(), t["ln_f.weight"].data.end(), 0.0f);
      std::fill(t["ln_f.bias"].data.begin(), t["ln_f.bias"].data.end(), 0.0f);
      t["ln_f.bias"].data[0] = 1.0f;
      for (std::size_t v = 0; v < spec.vocab_size; ++v) t["wte"].data[v * spec.d_model] = v == 7 ? 1.0f : -1.0f;
      const auto w = WeightStore::create(spec, t);
      const auto out = greedy_decode(w, prompt, 5);
      REQUIRE(out.size() == 8);
      CHECK(std::equal(prompt.begin(), prompt.end(), out.begin()));
      for (std::size_t i = 3; i < 8; ++i) CHECK(out[i] == 7);
    }
    SUBCASE("ties go to the lowest id") {
      auto t = testing::random_tensors(spec, 9);
      std::fill(t["wte"].data.begin(), t["wte"].data.end(), 0.25f);
      const auto w = WeightStore::create(spec, t);
      const auto out = greedy_decode(w, prompt, 2);
      CHECK(out[3] == 0);
      CHECK(out[4] == 0);
    }
    SUBCASE("too long") {
      const auto w = testing::random_model(spec, 7);
      CHECK_THROWS_AS(greedy_decode(w, prompt, spec.max_positions), Error);
    }
    CHECK(argmax_lowest(std::vector<float>{1, 3, 3, 2}) == 1);
  }

  TEST_CASE("steering changes planted-model continuations") {
    const auto bundle = planted::build_model();
    const auto& spec = bundle.weights.spec();
    SteeringSpec s;
    s.mode = SteeringMode::Adaptive;
    s.element_class = ElementClass::Head;
    s.delta = 2.0f;
    s.mask.element_class = ElementClass::Head;
    s.mask.unit = UnitKind::HeadVector;
    s.mask.n_layers = spec.n_layers;
    s.mask.units_per_layer = spec.n_heads;
    s.mask.k = 1;
    s.mask.bits.assign(spec.n_layers * spec.n_heads, 0);
    s.mask.bits[planted::planted_unit()] = 1;
    const Intervention tap(s, spec);
    ForwardOptions steered;
    steered.tap = &tap;

    std::size_t differing = 0;
    for (const auto& item : planted::mc_items(20, 5))
      for (const char* answer : {"yes", "no"}) {
        const auto prompt = bundle.tokenizer.encode(planted::prompt_template().render(item.question, answer));
        if (greedy_decode(bundle.weights, prompt, 3) != greedy_decode(bundle.weights, prompt, 3, steered))
          ++differing;
      }
    CHECK(differing > 0);
  }
}
