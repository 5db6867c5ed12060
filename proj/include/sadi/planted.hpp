#pragma once

// Planted-direction toy task: a 2-layer, 4-head, d_model=32 model in which a
// single designated head carries the answer-correctness signal, plus random
// distractor weights everywhere.
//
// Items look like "<s> w03 w11 sun w07 w19" with one cue word whose polarity
// (sun/gold/warm/bright vs ice/dark/cold/grey) decides whether " yes" or
// " no" is correct. Options are " yes ." and " no .".
//
// Mechanism. At an answer token the planted head's query matches the cue's
// key with sign (answer polarity x cue polarity); the cue's value is +1 and
// the <s> sink's value is -1 along one head channel, so the head outputs
// roughly +1 when the answer agrees with the cue and -1 otherwise. The output
// projection writes that channel into an "ok" residual direction which the
// tied unembedding of " ." reads. Scoring " yes ." vs " no ." therefore gets
// a correctness term from log p(" ." | ..., answer). The last filler word
// before the answer carries a random preference for " yes" or " no" through
// the unembedding, which is what keeps the unsteered model imperfect.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sadi/bundle.hpp"
#include "sadi/contrastive.hpp"
#include "sadi/eval.hpp"

namespace sadi::planted {

struct Config {
  std::uint64_t seed = 20240611;
  std::size_t planted_layer = 1;
  std::size_t planted_head = 2;

  float residual_norm = 8.0f;      // shared component carried by every token
  float query_gate = 56.0f;        // answer-token query onto the cue/<s> keys
  float query_agree = 24.0f;       // polarity-dependent part of the query
  float value_scale = 1.0f;        // cue +v, <s> -v on the head channel
  float output_scale = 2.0f;       // head channel -> ok direction
  float period_gain = 3.5f;        // " ." unembedding along the ok direction
  float period_bias = 2.0f;        // extra shared-component weight of " ."
  float answer_distractor = 4.0f;  // " yes"/" no" unembedding along the distractor axis
  float filler_distractor = 2.2f;  // max |preference| carried by a filler word
  float identity_scale = 0.3f;     // random per-token identity components
  float weight_noise = 0.02f;      // additive distractor weights
};

inline constexpr std::size_t kLayers = 2;
inline constexpr std::size_t kDModel = 32;
inline constexpr std::size_t kHeads = 4;
inline constexpr std::size_t kDff = 64;
inline constexpr std::size_t kMaxPositions = 24;
inline constexpr std::size_t kFillers = 24;

ModelSpec model_spec();
ModelBundle build_model(const Config& config = {});

// Flat head index (layer * n_heads + head) of the planted head.
std::size_t planted_unit(const Config& config = {});

// Labels alternate so both polarities appear equally often; the gold option
// position is randomized.
std::vector<MCItem> mc_items(std::size_t n, std::uint64_t seed);
std::vector<ContrastivePair> contrastive_pairs(std::size_t n, std::uint64_t seed);
std::vector<QAItem> qa_items(std::size_t n, std::uint64_t seed);

// Template used throughout the fixture.
PromptTemplate prompt_template();

struct FixtureSizes {
  std::size_t mc = 200, pairs = 150, qa = 50;
  std::uint64_t mc_seed = 101, pair_seed = 202, qa_seed = 303;
};

// Writes <dir>/model/ (bundle), <dir>/pairs.jsonl, <dir>/mc.jsonl and
// <dir>/qa.jsonl. Throws IoFailure.
void write_fixture(const std::filesystem::path& dir, const Config& config = {},
                   const FixtureSizes& sizes = {});

}  // namespace sadi::planted
