#include "sadi/cli.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sadi/analysis.hpp"
#include "sadi/bundle.hpp"
#include "sadi/contrastive.hpp"
#include "sadi/error.hpp"
#include "sadi/eval.hpp"
#include "sadi/mask.hpp"

namespace sadi {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

bool out_is_file(const std::string& subcommand) {
  return subcommand == "mask" || subcommand == "analyze";
}

void log_stage(std::ostream& err, const std::string& sub, const std::string& what) {
  err << "[sadi " << sub << "] " << what << '\n';
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

json provenance(const RunConfig& c, const json& artifacts) {
  return {{"subcommand", c.subcommand},
          {"config", json::parse(c.snapshot)},
          {"seed", c.seed},
          {"artifacts", artifacts}};
}

void write_provenance(const RunConfig& c, const std::vector<fs::path>& artifacts) {
  json arts = json::object();
  for (const auto& a : artifacts) arts[a.filename().string()] = sha256_hex(a);
  write_text(provenance_path(c), provenance(c, arts).dump(2) + "\n");
}

// Runs without an output path still get a provenance record, on stderr.
void log_stdout_provenance(const RunConfig& c, std::ostream& err, const std::string& printed) {
  log_stage(err, c.subcommand, "provenance " + provenance(c, {{"stdout", sha256_hex_bytes(printed)}}).dump());
}

SteeringSpec steering_from(const RunConfig& c, const ModelSpec& model) {
  SteeringSpec spec;
  spec.mode = c.mode;
  spec.delta = c.delta;
  spec.positions = c.positions;
  if (c.mode == SteeringMode::Off) return spec;
  spec.mask = load_mask(c.mask);
  spec.element_class = spec.mask.element_class;
  if (c.mode == SteeringMode::Fixed) {
    const auto diffs = load_traces(c.direction);
    spec.fixed_direction = mean_difference(diffs);
  }
  Intervention(spec, model);  // layout check up front
  return spec;
}

std::string records_jsonl(std::span<const EvalRecord> records) {
  std::string s;
  for (const auto& r : records) s += record_to_json(r) + "\n";
  return s;
}

std::vector<InstanceDifference> load_diffs_checked(const RunConfig& c) {
  auto diffs = load_traces(c.diffs);
  if (diffs.empty()) throw Error(ErrorKind::EmptyBatch, "no differences in " + c.diffs.string());
  if (c.element_class && diffs.front().element_class != *c.element_class)
    throw Error(ErrorKind::HeterogeneousBatch,
                "differences in " + c.diffs.string() + " were extracted for class " +
                    std::string(element_class_name(diffs.front().element_class)));
  return diffs;
}

void cmd_extract(const RunConfig& c, std::ostream&, std::ostream& err) {
  const auto bundle = load_bundle(c.model_dir);
  log_stage(err, c.subcommand, "loaded model from " + c.model_dir.string());
  const auto pairs = read_pairs_jsonl(c.data);
  if (pairs.empty()) throw Error(ErrorKind::EmptyDataset, "no contrastive pairs in " + c.data.string());
  const auto tmpl = builtin_template(c.template_name);
  const auto diffs = extract_differences(bundle.weights, bundle.tokenizer, pairs, tmpl, *c.element_class);
  log_stage(err, c.subcommand, "extracted " + std::to_string(diffs.size()) + " differences");
  dump_traces(diffs, c.out);
  write_provenance(c, {c.out / "diffs.safetensors", c.out / "manifest.json"});
  log_stage(err, c.subcommand, "wrote " + c.out.string());
}

void cmd_mask(const RunConfig& c, std::ostream&, std::ostream& err) {
  const auto diffs = load_diffs_checked(c);
  const auto mean = mean_difference(diffs);
  log_stage(err, c.subcommand, "averaged " + std::to_string(diffs.size()) + " differences");
  const auto mask = c.random ? random_mask(mean, c.k, c.seed)
                             : binarize(mean, c.k, c.signed_ranking ? Ranking::Signed : Ranking::Absolute);
  save_mask(mask, c.out);
  write_provenance(c, {c.out});
  log_stage(err, c.subcommand, "wrote " + c.out.string());
}

void cmd_steer(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(c.model_dir);
  const auto spec = steering_from(c, bundle.weights.spec());
  const Intervention tap(spec, bundle.weights.spec());
  ForwardOptions fo;
  fo.tap = spec.mode == SteeringMode::Off ? nullptr : &tap;
  const auto prompt = bundle.tokenizer.encode(c.prompt);
  const auto seq = greedy_decode(bundle.weights, prompt, c.max_new, fo);
  const auto continuation = bundle.tokenizer.decode(std::span(seq).subspan(prompt.size()));
  log_stage(err, c.subcommand, "generated " + std::to_string(seq.size() - prompt.size()) + " tokens");
  out << continuation << '\n';
  if (c.out.empty()) {
    log_stdout_provenance(c, err, continuation + "\n");
  } else {
    json j = {{"prompt", c.prompt},
              {"continuation", continuation},
              {"tokens", std::vector<TokenId>(seq.begin(), seq.end())}};
    write_text(c.out / "steer.json", j.dump(2) + "\n");
    write_provenance(c, {c.out / "steer.json"});
  }
}

void cmd_eval(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(c.model_dir);
  const auto spec = steering_from(c, bundle.weights.spec());
  const auto tmpl = builtin_template(c.template_name);
  EvalRecord r;
  if (c.task == "mc") {
    const auto items = read_mc_jsonl(c.data);
    log_stage(err, c.subcommand, "scoring " + std::to_string(items.size()) + " items");
    r = eval_accuracy(bundle.weights, bundle.tokenizer, items, tmpl, spec,
                      ScoreOptions{c.length_normalized});
  } else {
    const auto items = read_qa_jsonl(c.data);
    log_stage(err, c.subcommand, "generating for " + std::to_string(items.size()) + " items");
    r = eval_em(bundle.weights, bundle.tokenizer, items, tmpl, spec, c.max_new);
  }
  r.task_id = c.task_id;
  r.seed = c.seed;
  const std::vector<EvalRecord> records = {r};
  write_text(c.out / "results.jsonl", records_jsonl(records));
  write_provenance(c, {c.out / "results.jsonl"});
  out << format_records(records);
}

SweepOptions sweep_options(const RunConfig& c) {
  SweepOptions o;
  o.positions = c.positions;
  o.scoring.length_normalized = c.length_normalized;
  o.task_id = c.task_id;
  return o;
}

void cmd_sweep(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(c.model_dir);
  const auto diffs = load_diffs_checked(c);
  const auto items = read_mc_jsonl(c.data);
  log_stage(err, c.subcommand, "sweeping " + std::to_string(c.k_grid.size() * c.delta_grid.size()) + " cells");
  const auto records = sweep(bundle.weights, bundle.tokenizer, items, builtin_template(c.template_name),
                             diffs.front().element_class, diffs, c.k_grid, c.delta_grid, c.seed,
                             sweep_options(c));
  write_text(c.out / "results.jsonl", records_jsonl(records));
  write_provenance(c, {c.out / "results.jsonl"});
  out << format_records(records);
}

void cmd_ablate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  const auto bundle = load_bundle(c.model_dir);
  const auto diffs = load_diffs_checked(c);
  const auto items = read_mc_jsonl(c.data);
  log_stage(err, c.subcommand, "running ablation battery on " + std::to_string(items.size()) + " items");
  const auto table = ablation_battery(bundle.weights, bundle.tokenizer, items,
                                      builtin_template(c.template_name), diffs.front().element_class,
                                      diffs, c.k, c.delta, c.seeds, sweep_options(c));
  const auto rows = table.rows();
  write_text(c.out / "results.jsonl", records_jsonl(rows));
  write_provenance(c, {c.out / "results.jsonl"});
  const std::vector<EvalRecord> summary = {table.sadi, table.random_mean, table.fixed, table.off};
  out << format_records(summary);
}

void cmd_analyze(const RunConfig& c, std::ostream& out, std::ostream& err) {
  std::string csv;
  if (c.kind == "overlap") {
    std::map<std::string, IdentificationMask> masks;
    for (const auto& p : c.masks) {
      auto name = p.stem().string();
      if (masks.count(name)) name = p.string();
      masks.emplace(name, load_mask(p));
    }
    csv = mask_overlap(masks).to_csv();
  } else {
    const auto mean = mean_difference(load_diffs_checked(c));
    csv = c.kind == "heatmap" ? difference_heatmap(mean).to_csv()
                              : histogram_to_csv(topk_layer_histogram(mean, c.top));
  }
  log_stage(err, c.subcommand, c.kind + " computed");
  if (c.out.empty()) {
    out << csv;
    log_stdout_provenance(c, err, csv);
  } else {
    write_text(c.out, csv);
    write_provenance(c, {c.out});
  }
}

}  // namespace

std::string sha256_hex(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot hash " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return sha256_hex_bytes(ss.str());
}

std::string sha256_hex_bytes(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s.push_back(hex[digest[i] >> 4]);
    s.push_back(hex[digest[i] & 15]);
  }
  return s;
}

fs::path provenance_path(const RunConfig& c) {
  if (out_is_file(c.subcommand)) return fs::path(c.out.string() + ".provenance.json");
  return c.out / "provenance.json";
}

fs::path error_path(const std::string& subcommand, const fs::path& out) {
  if (out_is_file(subcommand)) return fs::path(out.string() + ".error.json");
  return out / "error.json";
}

void run_subcommand(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (c.subcommand == "extract") return cmd_extract(c, out, err);
  if (c.subcommand == "mask") return cmd_mask(c, out, err);
  if (c.subcommand == "steer") return cmd_steer(c, out, err);
  if (c.subcommand == "eval") return cmd_eval(c, out, err);
  if (c.subcommand == "sweep") return cmd_sweep(c, out, err);
  if (c.subcommand == "ablate") return cmd_ablate(c, out, err);
  if (c.subcommand == "analyze") return cmd_analyze(c, out, err);
  throw Error(ErrorKind::InvalidArgument, "unknown subcommand '" + c.subcommand + "'");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantics-adaptive activation steering for small decoder-only transformers", "sadi"};
  app.require_subcommand(1);

  struct SubState {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> raw;
    std::map<std::string, CLI::Option*> options;
  };
  std::map<std::string, SubState> subs;
  for (const auto& name : subcommands()) {
    auto& st = subs[name];
    st.app = app.add_subcommand(name);
    st.app->allow_extras();
    st.app->add_option("--config", st.config_file, "JSON run configuration; flags override it");
    for (const auto& key : subcommand_keys(name)) {
      const auto& spec = *std::find_if(config_schema().begin(), config_schema().end(),
                                       [&](const ConfigKey& k) { return k.key == key; });
      if (spec.flag.empty())
        st.options[key] = st.app->add_option(key, st.raw[key]);
      else if (spec.type == ConfigKey::Type::Bool)
        st.options[key] = st.app->add_flag("--" + spec.flag);
      else
        st.options[key] = st.app->add_option("--" + spec.flag, st.raw[key]);
    }
  }

  std::string name;
  fs::path out_hint;
  auto fail = [&](const std::string& kind, const std::string& detail) {
    json j = {{"error_kind", kind}, {"detail", detail}};
    err << j.dump() << '\n';
    if (!name.empty() && !out_hint.empty()) {
      try {
        write_text(error_path(name, out_hint), j.dump(2) + "\n");
      } catch (const std::exception&) {
      }
    }
    return 1;
  };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return fail("TypeError", e.what());
  }

  for (auto& [n, st] : subs)
    if (st.app->parsed()) name = n;
  auto& st = subs[name];
  std::map<std::string, std::string> flags;
  for (const auto& [key, opt] : st.options)
    if (opt->count() > 0) flags[key] = opt->get_expected_min() == 0 ? "true" : st.raw[key];
  if (flags.count("out")) out_hint = flags["out"];

  try {
    for (const auto& extra : st.app->remaining()) {
      if (extra.rfind("--", 0) != 0) throw Error(ErrorKind::InvalidArgument, "unexpected argument '" + extra + "'");
      auto key = extra.substr(2, extra.find('=') == std::string::npos ? std::string::npos : extra.find('=') - 2);
      std::replace(key.begin(), key.end(), '-', '_');
      throw Error(ErrorKind::UnknownKey, key);
    }
    std::optional<fs::path> config_file;
    if (!st.config_file.empty()) config_file = st.config_file;
    const auto config = parse_config_file(name, config_file, flags);
    out_hint = config.out;
    if (!out_hint.empty()) {
      std::error_code ec;
      fs::remove(error_path(name, out_hint), ec);
    }
    run_subcommand(config, out, err);
    return 0;
  } catch (const Error& e) {
    return fail(std::string(error_kind_name(e.kind())), e.what());
  } catch (const std::exception& e) {
    return fail("IoFailure", e.what());
  }
}

}  // namespace sadi
