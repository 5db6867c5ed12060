// Writes the planted-direction toy model and its datasets:
//   <dir>/model/       model.json, model.safetensors, vocab.json
//   <dir>/pairs.jsonl  contrastive pairs
//   <dir>/mc.jsonl     multiple-choice items
//   <dir>/qa.jsonl     short-answer items

#include <iostream>

#include "CLI11.hpp"
#include "sadi/planted.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write the planted toy model and datasets", "make_fixture"};
  std::filesystem::path dir;
  sadi::planted::Config cfg;
  sadi::planted::FixtureSizes sizes;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--mc", sizes.mc, "Number of multiple-choice items");
  app.add_option("--pairs", sizes.pairs, "Number of contrastive pairs");
  app.add_option("--qa", sizes.qa, "Number of short-answer items");
  app.add_option("--model-seed", cfg.seed);
  app.add_option("--mc-seed", sizes.mc_seed);
  app.add_option("--pair-seed", sizes.pair_seed);
  app.add_option("--qa-seed", sizes.qa_seed);
  CLI11_PARSE(app, argc, argv);

  try {
    sadi::planted::write_fixture(dir, cfg, sizes);
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << '\n';
    return 1;
  }
  std::cout << dir.string() << '\n';
  return 0;
}
