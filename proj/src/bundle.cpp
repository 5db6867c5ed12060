#include "sadi/bundle.hpp"

#include <fstream>

#include "sadi/error.hpp"

namespace sadi {

ModelBundle load_bundle(const std::filesystem::path& dir) {
  ModelBundle b{load_model_dir(dir), Tokenizer::from_file(dir / "vocab.json")};
  if (b.tokenizer.id_bound() > b.weights.spec().vocab_size)
    throw Error(ErrorKind::TokenOutOfRange, "vocab.json has ids beyond the model's vocab_size");
  return b;
}

void save_bundle(const std::filesystem::path& dir, const ModelBundle& bundle) {
  save_model_dir(dir, bundle.weights);
  std::ofstream out(dir / "vocab.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + (dir / "vocab.json").string());
  out << bundle.tokenizer.to_json() << '\n';
}

}  // namespace sadi
