#pragma once

// Run configuration shared by every CLI subcommand. Values come from an
// optional JSON config file and from command-line flags; flags win. Keys not
// in the schema are rejected with Error{UnknownKey}.
//
// Schema (JSON key / flag):
//   model_dir      --model        path
//   data           --data         path (JSONL)
//   diffs          --diffs        path (directory written by `extract`)
//   mask           --mask         path (mask JSON)
//   direction      --direction    path (diffs directory for fixed steering)
//   masks          --masks        list of paths (overlap)
//   out            --out          path
//   element_class  --class        hidden | head | neuron
//   template       --template     mc | qa
//   task           --task         mc | qa
//   task_id        --task-id      string
//   mode           --mode         adaptive | fixed | off
//   positions      --positions    all | last-prompt-onward
//   prompt         --prompt       string
//   k              --k            integer
//   k_grid         --k-grid       list of integers
//   delta          --delta        number
//   delta_grid     --delta-grid   list of numbers
//   seed           --seed         integer
//   seeds          --seeds        list of integers
//   max_new        --max-new      integer
//   top            --top          integer
//   random         --random       bool
//   signed         --signed       bool
//   length_normalized --length-normalized bool
//   kind           (positional)   heatmap | histogram | overlap

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sadi/element.hpp"
#include "sadi/steering.hpp"

namespace sadi {

struct ConfigKey {
  std::string key;
  std::string flag;  // without leading dashes; empty for positional
  enum class Type { Path, String, Int, Float, Bool, IntList, FloatList, PathList } type;
};

const std::vector<ConfigKey>& config_schema();
// Keys meaningful for a subcommand, in schema order.
std::vector<std::string> subcommand_keys(const std::string& subcommand);
std::vector<std::string> subcommands();

struct RunConfig {
  std::string subcommand;
  std::filesystem::path model_dir, data, diffs, mask, direction, out;
  std::vector<std::filesystem::path> masks;
  std::optional<ElementClass> element_class;
  std::string template_name = "mc";
  std::string task = "mc";
  std::string task_id = "task";
  SteeringMode mode = SteeringMode::Off;
  PositionPolicy positions = PositionPolicy::AllPositions;
  std::string prompt;
  std::size_t k = 0;
  std::vector<std::size_t> k_grid;
  float delta = 0.0f;
  std::vector<float> delta_grid;
  std::uint64_t seed = 0;
  std::vector<std::uint64_t> seeds;
  std::size_t max_new = 16;
  std::size_t top = 100;
  bool random = false;
  bool signed_ranking = false;
  bool length_normalized = false;
  std::string kind;

  // Effective key/value set as canonical JSON (sorted keys), for provenance.
  std::string snapshot;
};

// flags: raw flag values keyed by JSON key (strings as typed on the command
// line; "true" for bare boolean flags). Throws UnknownKey, MissingRequired,
// TypeError, InvalidArgument, IoFailure (missing input path when
// check_paths is set).
RunConfig parse_config(const std::string& subcommand, const std::string& config_json,
                       const std::map<std::string, std::string>& flags,
                       bool check_paths = true);
RunConfig parse_config_file(const std::string& subcommand,
                            const std::optional<std::filesystem::path>& config_file,
                            const std::map<std::string, std::string>& flags,
                            bool check_paths = true);

}  // namespace sadi
