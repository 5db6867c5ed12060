#include "support.hpp"

#include <atomic>
#include <unistd.h>

namespace testing {

sadi::ModelSpec tiny_spec(std::size_t layers, std::size_t d_model, std::size_t heads,
                          std::size_t d_ff, std::size_t vocab, std::size_t positions) {
  sadi::ModelSpec s;
  s.n_layers = layers;
  s.d_model = d_model;
  s.n_heads = heads;
  s.d_ff = d_ff;
  s.vocab_size = vocab;
  s.max_positions = positions;
  return s;
}

sadi::TensorMap random_tensors(const sadi::ModelSpec& spec, std::uint64_t seed, float scale) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-scale, scale);
  sadi::TensorMap map;
  for (const auto& req : sadi::required_tensors(spec)) {
    sadi::Tensor t;
    t.shape = req.shape;
    t.data.resize(t.numel());
    const bool gain = req.name.find("ln_") != std::string::npos && req.name.ends_with(".weight");
    for (auto& v : t.data) v = (gain ? 1.0f : 0.0f) + u(rng);
    map.emplace(req.name, std::move(t));
  }
  return map;
}

sadi::WeightStore random_model(const sadi::ModelSpec& spec, std::uint64_t seed, float scale) {
  return sadi::WeightStore::create(spec, random_tensors(spec, seed, scale));
}

std::vector<sadi::TokenId> random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::uniform_int_distribution<sadi::TokenId> pick(0, static_cast<sadi::TokenId>(vocab - 1));
  std::vector<sadi::TokenId> out(n);
  for (auto& t : out) t = pick(rng);
  return out;
}

sadi::Tokenizer letter_tokenizer(std::size_t vocab) {
  std::unordered_map<std::string, sadi::TokenId> v;
  for (std::size_t i = 0; i < vocab; ++i) v.emplace(std::string(1, char('a' + i)), static_cast<sadi::TokenId>(i));
  return sadi::Tokenizer(std::move(v));
}

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("sadi-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace testing
