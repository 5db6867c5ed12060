#pragma once

// Scoring and experiment drivers: multiple-choice accuracy, exact match on
// greedy generations, (K, delta) grid sweeps and the ablation battery.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sadi/contrastive.hpp"
#include "sadi/difference.hpp"
#include "sadi/mask.hpp"
#include "sadi/steering.hpp"
#include "sadi/tokenizer.hpp"

namespace sadi {

struct MCItem {
  std::string id;
  std::string question;
  std::vector<std::string> options;  // 2..5
  std::size_t gold_index = 0;
};

struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> answers;
};

struct EvalRecord {
  std::string task_id;
  std::string variant;  // "steered", "sadi", "random", "fixed", "off", ...
  SteeringMode mode = SteeringMode::Off;
  ElementClass element_class = ElementClass::Head;
  std::size_t k = 0;
  float delta = 0.0f;
  std::string metric;  // "accuracy" or "exact_match"
  double value = 0.0;
  std::size_t n_items = 0;
  std::uint64_t seed = 0;
};

std::string record_to_json(const EvalRecord& r);
// Fixed-width summary table for standard output.
std::string format_records(std::span<const EvalRecord> records);

std::vector<MCItem> parse_mc_jsonl(const std::string& text);
std::vector<MCItem> read_mc_jsonl(const std::filesystem::path& path);
std::vector<QAItem> parse_qa_jsonl(const std::string& text);
std::vector<QAItem> read_qa_jsonl(const std::filesystem::path& path);

struct ScoreOptions {
  // Divide each option's summed log-probability by its token count.
  // Experimental; acceptance runs use the plain sum.
  bool length_normalized = false;
};

struct MCScore {
  std::size_t chosen = 0;
  std::vector<float> option_scores;
};

// Sum of log p(option tokens | question prefix) under the (possibly steered)
// forward pass; argmax option with ties to the lowest index.
MCScore score_mc(const WeightStore& weights, const Tokenizer& tokenizer, const MCItem& item,
                 const PromptTemplate& tmpl, const ActivationTap* tap,
                 const ScoreOptions& options = {});
MCScore score_mc(const WeightStore& weights, const Tokenizer& tokenizer, const MCItem& item,
                 const PromptTemplate& tmpl, const SteeringSpec& spec,
                 const ScoreOptions& options = {});

// Throws EmptyDataset.
EvalRecord eval_accuracy(const WeightStore& weights, const Tokenizer& tokenizer,
                         std::span<const MCItem> items, const PromptTemplate& tmpl,
                         const SteeringSpec& spec, const ScoreOptions& options = {});

// Lowercase, drop ASCII punctuation and the articles a/an/the, collapse and
// trim whitespace.
std::string normalize_answer(std::string_view text);
bool exact_match(std::string_view generated, std::span<const std::string> references);

// Greedy continuation of the template's context, decoded to text.
std::string generate_answer(const WeightStore& weights, const Tokenizer& tokenizer,
                            const QAItem& item, const PromptTemplate& tmpl,
                            const ActivationTap* tap, std::size_t max_new);

EvalRecord eval_em(const WeightStore& weights, const Tokenizer& tokenizer,
                   std::span<const QAItem> items, const PromptTemplate& tmpl,
                   const SteeringSpec& spec, std::size_t max_new);

struct SweepOptions {
  PositionPolicy positions = PositionPolicy::AllPositions;
  ScoreOptions scoring;
  std::string task_id = "task";
};

// One adaptive-steering record per (K, delta), K-major. Throws KOutOfRange
// before any evaluation runs.
std::vector<EvalRecord> sweep(const WeightStore& weights, const Tokenizer& tokenizer,
                              std::span<const MCItem> items, const PromptTemplate& tmpl,
                              ElementClass element_class,
                              std::span<const InstanceDifference> diffs,
                              std::span<const std::size_t> k_grid,
                              std::span<const float> delta_grid, std::uint64_t seed,
                              const SweepOptions& options = {});

struct AblationTable {
  EvalRecord sadi;         // adaptive, top-K mask
  EvalRecord random_mean;  // adaptive, random mask, averaged over seeds
  EvalRecord fixed;        // fixed steering along the mean difference, top-K mask
  EvalRecord off;
  std::vector<EvalRecord> random_per_seed;

  std::vector<EvalRecord> rows() const;
};

AblationTable ablation_battery(const WeightStore& weights, const Tokenizer& tokenizer,
                               std::span<const MCItem> items, const PromptTemplate& tmpl,
                               ElementClass element_class,
                               std::span<const InstanceDifference> diffs, std::size_t k,
                               float delta, std::span<const std::uint64_t> seeds,
                               const SweepOptions& options = {});

}  // namespace sadi
