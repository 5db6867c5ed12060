#include <numeric>
#include <random>

#include "doctest.h"
#include "sadi/analysis.hpp"
#include "sadi/error.hpp"

using namespace sadi;

namespace {

MeanDifference mean_of(ElementClass c, std::size_t layers, std::size_t units, std::size_t width,
                       std::vector<float> values) {
  MeanDifference m;
  m.element_class = c;
  m.n_layers = layers;
  m.units_per_layer = units;
  m.layer_width = units * width;
  m.n_instances = 1;
  m.values = std::move(values);
  return m;
}

IdentificationMask mask(std::vector<std::uint8_t> bits, std::size_t layers = 2) {
  IdentificationMask m;
  m.element_class = ElementClass::Neuron;
  m.unit = UnitKind::Scalar;
  m.n_layers = layers;
  m.units_per_layer = bits.size() / layers;
  m.bits = std::move(bits);
  m.k = m.popcount();
  return m;
}

ErrorKind error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_SUITE("analysis") {
  TEST_CASE("heatmap rows and scores") {
    const auto m = mean_of(ElementClass::Hidden, 2, 3, 1, {1, -2, 3, -4, 5, -6});
    const auto h = difference_heatmap(m);
    REQUIRE(h.rows.size() == 6);
    CHECK(h.rows[4].layer == 1);
    CHECK(h.rows[4].unit == 1);
    const auto scores = unit_scores(m);
    for (std::size_t i = 0; i < 6; ++i) CHECK(h.rows[i].score == scores[i]);
    CHECK(h.to_csv().rfind("layer,unit,score\n0,0,1\n0,1,2\n", 0) == 0);

    const auto zeros = difference_heatmap(mean_of(ElementClass::Head, 2, 2, 3, std::vector<float>(12, 0.0f)));
    CHECK(zeros.rows.size() == 4);
    for (const auto& r : zeros.rows) CHECK(r.score == 0.0f);

    const auto heads = difference_heatmap(mean_of(ElementClass::Head, 1, 2, 2, {3, 4, 0, 1}));
    CHECK(heads.rows[0].score == 5.0f);
    CHECK(heads.rows[1].score == 1.0f);
  }

  TEST_CASE("histogram") {
    std::mt19937_64 rng(1);
    std::normal_distribution<float> g;
    std::vector<float> v(4 * 64);
    for (auto& x : v) x = g(rng);
    const auto m = mean_of(ElementClass::Neuron, 4, 64, 1, v);
    const auto h = topk_layer_histogram(m);
    CHECK(std::accumulate(h.begin(), h.end(), std::size_t{0}) == 100);
    CHECK(topk_layer_histogram(m, 256) == std::vector<std::size_t>{64, 64, 64, 64});

    std::vector<float> planted(4 * 128);
    for (auto& x : planted) x = 0.1f * g(rng);
    for (std::size_t k = 0; k < 128; ++k) planted[3 * 128 + k] = (k % 2 ? -5.0f : 5.0f) + g(rng) * 0.1f;
    CHECK(topk_layer_histogram(mean_of(ElementClass::Neuron, 4, 128, 1, planted)) ==
          std::vector<std::size_t>{0, 0, 0, 100});
    CHECK(error_of([&] { topk_layer_histogram(m, 257); }) == ErrorKind::KOutOfRange);
    CHECK(error_of([&] { topk_layer_histogram(m, 0); }) == ErrorKind::KOutOfRange);
    CHECK(histogram_to_csv({1, 2}) == "layer,count\n0,1\n1,2\n");
  }

  TEST_CASE("overlap") {
    std::map<std::string, IdentificationMask> masks;
    masks["a"] = mask({1, 1, 0, 0, 0, 0});
    masks["b"] = mask({1, 1, 0, 0, 0, 0});
    masks["c"] = mask({0, 0, 1, 1, 0, 0});
    masks["d"] = mask({0, 1, 1, 0, 0, 0});
    const auto o = mask_overlap(masks);
    CHECK(o.tasks == std::vector<std::string>{"a", "b", "c", "d"});
    CHECK(o.at(0, 1) == 1.0);
    CHECK(o.at(0, 2) == 0.0);
    CHECK(o.at(0, 3) == 0.5);
    CHECK(o.at(3, 0) == 0.5);
    for (std::size_t i = 0; i < 4; ++i) CHECK(o.at(i, i) == 1.0);

    std::vector<std::uint8_t> x(40, 0), y(40, 0);
    for (int i = 0; i < 10; ++i) x[i] = 1;
    for (int i = 7; i < 17; ++i) y[i] = 1;
    const auto three = mask_overlap({{"x", mask(x)}, {"y", mask(y)}});
    CHECK(three.at(0, 1) == doctest::Approx(0.3));
    CHECK(three.to_csv().rfind("task,x,y\nx,1,0.3", 0) == 0);

    auto different_k = masks;
    different_k["e"] = mask({1, 1, 1, 0, 0, 0});
    CHECK(error_of([&] { mask_overlap(different_k); }) == ErrorKind::HeterogeneousMasks);
    auto different_layout = masks;
    different_layout["e"] = mask({1, 1, 0, 0, 0, 0}, 3);
    CHECK(error_of([&] { mask_overlap(different_layout); }) == ErrorKind::HeterogeneousMasks);
  }
}
