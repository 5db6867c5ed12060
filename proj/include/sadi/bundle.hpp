#pragma once

#include <filesystem>

#include "sadi/model.hpp"
#include "sadi/tokenizer.hpp"

namespace sadi {

// A model directory: model.json, model.safetensors, vocab.json.
struct ModelBundle {
  WeightStore weights;
  Tokenizer tokenizer;
};

ModelBundle load_bundle(const std::filesystem::path& dir);
void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle);

}  // namespace sadi
