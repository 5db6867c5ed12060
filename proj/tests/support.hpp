#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "sadi/bundle.hpp"
#include "sadi/model.hpp"

namespace testing {

sadi::ModelSpec tiny_spec(std::size_t layers = 2, std::size_t d_model = 8, std::size_t heads = 2,
                          std::size_t d_ff = 16, std::size_t vocab = 20, std::size_t positions = 16);

// Every required tensor filled uniformly from [-scale, scale]; layer-norm
// gains are 1 + noise so the norms stay well conditioned.
sadi::TensorMap random_tensors(const sadi::ModelSpec& spec, std::uint64_t seed, float scale = 0.1f);
sadi::WeightStore random_model(const sadi::ModelSpec& spec, std::uint64_t seed, float scale = 0.1f);

std::vector<sadi::TokenId> random_tokens(std::mt19937_64& rng, std::size_t n, std::size_t vocab);

// Tokenizer with one single-character entry per id: "a", "b", ...
sadi::Tokenizer letter_tokenizer(std::size_t vocab);

// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
