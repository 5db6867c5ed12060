#include "sadi/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi {

using json = nlohmann::json;
using Type = ConfigKey::Type;

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"model_dir", "model", Type::Path},
      {"data", "data", Type::Path},
      {"diffs", "diffs", Type::Path},
      {"mask", "mask", Type::Path},
      {"direction", "direction", Type::Path},
      {"masks", "masks", Type::PathList},
      {"out", "out", Type::Path},
      {"element_class", "class", Type::String},
      {"template", "template", Type::String},
      {"task", "task", Type::String},
      {"task_id", "task-id", Type::String},
      {"mode", "mode", Type::String},
      {"positions", "positions", Type::String},
      {"prompt", "prompt", Type::String},
      {"k", "k", Type::Int},
      {"k_grid", "k-grid", Type::IntList},
      {"delta", "delta", Type::Float},
      {"delta_grid", "delta-grid", Type::FloatList},
      {"seed", "seed", Type::Int},
      {"seeds", "seeds", Type::IntList},
      {"max_new", "max-new", Type::Int},
      {"top", "top", Type::Int},
      {"random", "random", Type::Bool},
      {"signed", "signed", Type::Bool},
      {"length_normalized", "length-normalized", Type::Bool},
      {"kind", "", Type::String},
  };
  return schema;
}

std::vector<std::string> subcommands() {
  return {"extract", "mask", "steer", "eval", "sweep", "ablate", "analyze"};
}

std::vector<std::string> subcommand_keys(const std::string& sub) {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"extract", {"model_dir", "data", "out", "element_class", "template"}},
      {"mask", {"diffs", "out", "element_class", "k", "seed", "random", "signed"}},
      {"steer",
       {"model_dir", "mask", "direction", "out", "mode", "positions", "prompt", "delta",
        "max_new"}},
      {"eval",
       {"model_dir", "data", "mask", "direction", "out", "template", "task", "task_id", "mode",
        "positions", "delta", "max_new", "length_normalized"}},
      {"sweep",
       {"model_dir", "data", "diffs", "out", "element_class", "template", "task_id", "positions",
        "k_grid", "delta_grid", "seed", "length_normalized"}},
      {"ablate",
       {"model_dir", "data", "diffs", "out", "element_class", "template", "task_id", "positions",
        "k", "delta", "seeds", "length_normalized"}},
      {"analyze", {"diffs", "masks", "out", "top", "kind"}},
  };
  auto it = keys.find(sub);
  if (it == keys.end()) throw Error(ErrorKind::InvalidArgument, "unknown subcommand '" + sub + "'");
  return it->second;
}

namespace {

const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_schema())
    if (k.key == key) return &k;
  return nullptr;
}

[[noreturn]] void type_error(const std::string& key, const std::string& what) {
  throw Error(ErrorKind::TypeError, key + ": " + what);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

json parse_int(const std::string& key, const std::string& s) {
  unsigned long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    type_error(key, "expected a non-negative integer, got '" + s + "'");
  return json(v);
}

json parse_float(const std::string& key, const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    type_error(key, "expected a finite number, got '" + s + "'");
  return json(v);
}

json flag_to_json(const ConfigKey& k, const std::string& raw) {
  switch (k.type) {
    case Type::Path:
    case Type::String: return json(raw);
    case Type::Int: return parse_int(k.key, raw);
    case Type::Float: return parse_float(k.key, raw);
    case Type::Bool:
      if (raw == "true" || raw == "1" || raw.empty()) return json(true);
      if (raw == "false" || raw == "0") return json(false);
      type_error(k.key, "expected true/false, got '" + raw + "'");
    case Type::IntList: {
      json arr = json::array();
      for (const auto& p : split_list(raw)) arr.push_back(parse_int(k.key, p));
      return arr;
    }
    case Type::FloatList: {
      json arr = json::array();
      for (const auto& p : split_list(raw)) arr.push_back(parse_float(k.key, p));
      return arr;
    }
    case Type::PathList: {
      json arr = json::array();
      for (const auto& p : split_list(raw)) arr.push_back(p);
      return arr;
    }
  }
  return json();
}

void check_file_value(const ConfigKey& k, const json& v) {
  auto is_uint = [](const json& x) {
    return x.is_number_unsigned() || (x.is_number_integer() && x.get<long long>() >= 0);
  };
  bool ok = false;
  switch (k.type) {
    case Type::Path:
    case Type::String: ok = v.is_string(); break;
    case Type::Int: ok = is_uint(v); break;
    case Type::Float: ok = v.is_number() && std::isfinite(v.get<double>()); break;
    case Type::Bool: ok = v.is_boolean(); break;
    case Type::IntList: ok = v.is_array() && std::all_of(v.begin(), v.end(), is_uint); break;
    case Type::FloatList:
      ok = v.is_array() &&
           std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_number(); });
      break;
    case Type::PathList:
      ok = v.is_array() &&
           std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); });
      break;
  }
  if (!ok) type_error(k.key, "value " + v.dump() + " has the wrong type");
}

template <typename Enum, typename ParseFn>
Enum parse_enum(const json& values, const std::string& key, ParseFn parse, Enum fallback) {
  if (!values.contains(key)) return fallback;
  const auto s = values.at(key).get<std::string>();
  auto parsed = parse(s);
  if (!parsed) type_error(key, "unrecognized value '" + s + "'");
  return *parsed;
}

}  // namespace

RunConfig parse_config(const std::string& subcommand, const std::string& config_json,
                       const std::map<std::string, std::string>& flags, bool check_paths) {
  const auto relevant = subcommand_keys(subcommand);
  json merged = json::object();

  if (!config_json.empty()) {
    json file;
    try {
      file = json::parse(config_json);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::TypeError, std::string("config file is not valid JSON: ") + e.what());
    }
    if (!file.is_object()) throw Error(ErrorKind::TypeError, "config file must be a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      const ConfigKey* k = find_key(it.key());
      if (!k) throw Error(ErrorKind::UnknownKey, it.key());
      check_file_value(*k, it.value());
      merged[it.key()] = it.value();
    }
  }
  for (const auto& [key, raw] : flags) {
    const ConfigKey* k = find_key(key);
    if (!k) throw Error(ErrorKind::UnknownKey, key);
    merged[key] = flag_to_json(*k, raw);
  }

  json effective = json::object();
  for (const auto& key : relevant)
    if (merged.contains(key)) effective[key] = merged.at(key);

  auto has = [&](const char* key) { return effective.contains(key); };
  auto require = [&](const char* key) {
    if (!has(key)) throw Error(ErrorKind::MissingRequired, key);
  };

  RunConfig c;
  c.subcommand = subcommand;
  auto path = [&](const char* key) {
    return has(key) ? std::filesystem::path(effective.at(key).get<std::string>())
                    : std::filesystem::path();
  };
  c.model_dir = path("model_dir");
  c.data = path("data");
  c.diffs = path("diffs");
  c.mask = path("mask");
  c.direction = path("direction");
  c.out = path("out");
  if (has("masks"))
    for (const auto& m : effective.at("masks")) c.masks.emplace_back(m.get<std::string>());
  if (has("element_class")) {
    const auto s = effective.at("element_class").get<std::string>();
    c.element_class = parse_element_class(s);
    if (!c.element_class) type_error("element_class", "unrecognized value '" + s + "'");
  }
  if (has("template")) c.template_name = effective.at("template").get<std::string>();
  if (has("task")) c.task = effective.at("task").get<std::string>();
  if (has("task_id")) c.task_id = effective.at("task_id").get<std::string>();
  if (c.task != "mc" && c.task != "qa") type_error("task", "expected mc or qa");
  c.mode = parse_enum(effective, "mode", parse_steering_mode,
                      subcommand == "steer" ? SteeringMode::Adaptive : SteeringMode::Off);
  c.positions = parse_enum(effective, "positions", parse_position_policy, PositionPolicy::AllPositions);
  if (has("prompt")) c.prompt = effective.at("prompt").get<std::string>();
  if (has("k")) c.k = effective.at("k").get<std::size_t>();
  if (has("k_grid")) c.k_grid = effective.at("k_grid").get<std::vector<std::size_t>>();
  if (has("delta")) c.delta = effective.at("delta").get<float>();
  if (has("delta_grid")) c.delta_grid = effective.at("delta_grid").get<std::vector<float>>();
  if (has("seed")) c.seed = effective.at("seed").get<std::uint64_t>();
  if (has("seeds")) c.seeds = effective.at("seeds").get<std::vector<std::uint64_t>>();
  if (has("max_new")) c.max_new = effective.at("max_new").get<std::size_t>();
  if (has("top")) c.top = effective.at("top").get<std::size_t>();
  if (has("random")) c.random = effective.at("random").get<bool>();
  if (has("signed")) c.signed_ranking = effective.at("signed").get<bool>();
  if (has("length_normalized")) c.length_normalized = effective.at("length_normalized").get<bool>();
  if (has("kind")) c.kind = effective.at("kind").get<std::string>();

  const bool steering = c.mode != SteeringMode::Off;
  if (subcommand == "extract") {
    for (auto k : {"model_dir", "data", "element_class", "out"}) require(k);
  } else if (subcommand == "mask") {
    for (auto k : {"diffs", "k", "out"}) require(k);
  } else if (subcommand == "steer") {
    for (auto k : {"model_dir", "prompt"}) require(k);
    if (steering) require("mask");
    if (c.mode == SteeringMode::Fixed) require("direction");
  } else if (subcommand == "eval") {
    for (auto k : {"model_dir", "data", "out"}) require(k);
    if (steering) require("mask");
    if (c.mode == SteeringMode::Fixed) require("direction");
  } else if (subcommand == "sweep") {
    for (auto k : {"model_dir", "data", "diffs", "k_grid", "delta_grid", "out"}) require(k);
    if (c.k_grid.empty()) throw Error(ErrorKind::MissingRequired, "k_grid");
    if (c.delta_grid.empty()) throw Error(ErrorKind::MissingRequired, "delta_grid");
  } else if (subcommand == "ablate") {
    for (auto k : {"model_dir", "data", "diffs", "k", "delta", "seeds", "out"}) require(k);
    if (c.seeds.empty()) throw Error(ErrorKind::MissingRequired, "seeds");
  } else if (subcommand == "analyze") {
    require("kind");
    if (c.kind == "heatmap" || c.kind == "histogram")
      require("diffs");
    else if (c.kind == "overlap")
      require("masks");
    else
      type_error("kind", "expected heatmap, histogram or overlap");
  }
  if (has("k") && c.k == 0) throw Error(ErrorKind::KOutOfRange, "k must be >= 1");
  for (auto k : c.k_grid)
    if (k == 0) throw Error(ErrorKind::KOutOfRange, "k_grid entries must be >= 1");

  if (check_paths) {
    for (const auto& [key, p] : {std::pair{"model_dir", c.model_dir}, std::pair{"data", c.data},
                                 std::pair{"diffs", c.diffs}, std::pair{"mask", c.mask},
                                 std::pair{"direction", c.direction}})
      if (!p.empty() && !std::filesystem::exists(p))
        throw Error(ErrorKind::IoFailure, std::string(key) + ": path does not exist: " + p.string());
    for (const auto& p : c.masks)
      if (!std::filesystem::exists(p))
        throw Error(ErrorKind::IoFailure, "masks: path does not exist: " + p.string());
  }

  c.snapshot = effective.dump();
  return c;
}

RunConfig parse_config_file(const std::string& subcommand,
                            const std::optional<std::filesystem::path>& config_file,
                            const std::map<std::string, std::string>& flags, bool check_paths) {
  std::string text;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw Error(ErrorKind::IoFailure, "cannot open config " + config_file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(subcommand, text, flags, check_paths);
}

}  // namespace sadi
