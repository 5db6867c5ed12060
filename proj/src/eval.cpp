#include "sadi/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi {

using json = nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void for_each_jsonl(const std::string& text, Fn&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      fn(json::parse(line), lineno);
    } catch (const json::exception& e) {
      throw Error(ErrorKind::MalformedDataset, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

std::string id_of(const json& j) {
  const auto& id = j.at("id");
  return id.is_string() ? id.get<std::string>() : id.dump();
}

// log-softmax of row evaluated at one index.
float log_prob(std::span<const float> row, std::size_t index) {
  float max_logit = row[0];
  for (float v : row) max_logit = std::max(max_logit, v);
  float sum = 0.0f;
  for (float v : row) sum += std::exp(v - max_logit);
  return row[index] - max_logit - std::log(sum);
}

EvalRecord base_record(const SteeringSpec& spec, std::string metric, std::size_t n) {
  EvalRecord r;
  r.variant = spec.mode == SteeringMode::Off ? "off" : "steered";
  r.mode = spec.mode;
  r.element_class = spec.element_class;
  r.k = spec.mode == SteeringMode::Off ? 0 : spec.mask.k;
  r.delta = spec.mode == SteeringMode::Off ? 0.0f : spec.delta;
  r.metric = std::move(metric);
  r.n_items = n;
  return r;
}

}  // namespace

std::string record_to_json(const EvalRecord& r) {
  json j = {{"task_id", r.task_id},
            {"variant", r.variant},
            {"mode", steering_mode_name(r.mode)},
            {"element_class", element_class_name(r.element_class)},
            {"K", r.k},
            {"delta", r.delta},
            {"metric", r.metric},
            {"value", r.value},
            {"n_items", r.n_items},
            {"seed", r.seed}};
  return j.dump();
}

std::string format_records(std::span<const EvalRecord> records) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "variant" << std::setw(10) << "mode" << std::setw(8)
     << "class" << std::right << std::setw(6) << "K" << std::setw(9) << "delta" << "  "
     << std::left << std::setw(13) << "metric" << std::right << std::setw(8) << "value"
     << std::setw(7) << "n" << '\n';
  for (const auto& r : records) {
    os << std::left << std::setw(12) << r.variant << std::setw(10) << steering_mode_name(r.mode)
       << std::setw(8) << element_class_name(r.element_class) << std::right << std::setw(6)
       << r.k << std::setw(9) << std::fixed << std::setprecision(3) << r.delta << "  "
       << std::left << std::setw(13) << r.metric << std::right << std::setw(8)
       << std::setprecision(4) << r.value << std::setw(7) << r.n_items << '\n';
  }
  return os.str();
}

std::vector<MCItem> parse_mc_jsonl(const std::string& text) {
  std::vector<MCItem> items;
  for_each_jsonl(text, [&](const json& j, std::size_t lineno) {
    MCItem it;
    it.id = id_of(j);
    it.question = j.at("question").get<std::string>();
    it.options = j.at("options").get<std::vector<std::string>>();
    it.gold_index = j.at("gold_index").get<std::size_t>();
    if (it.options.size() < 2 || it.options.size() > 5 || it.gold_index >= it.options.size())
      throw Error(ErrorKind::MalformedDataset,
                  "line " + std::to_string(lineno) + ": need 2-5 options and gold_index < |options|");
    items.push_back(std::move(it));
  });
  return items;
}

std::vector<MCItem> read_mc_jsonl(const std::filesystem::path& path) {
  return parse_mc_jsonl(slurp(path));
}

std::vector<QAItem> parse_qa_jsonl(const std::string& text) {
  std::vector<QAItem> items;
  for_each_jsonl(text, [&](const json& j, std::size_t lineno) {
    QAItem it;
    it.id = id_of(j);
    it.question = j.at("question").get<std::string>();
    it.answers = j.at("answers").get<std::vector<std::string>>();
    if (it.answers.empty())
      throw Error(ErrorKind::MalformedDataset, "line " + std::to_string(lineno) + ": no answers");
    items.push_back(std::move(it));
  });
  return items;
}

std::vector<QAItem> read_qa_jsonl(const std::filesystem::path& path) {
  return parse_qa_jsonl(slurp(path));
}

MCScore score_mc(const WeightStore& weights, const Tokenizer& tokenizer, const MCItem& item,
                 const PromptTemplate& tmpl, const ActivationTap* tap,
                 const ScoreOptions& options) {
  MCScore result;
  const std::size_t limit = weights.spec().max_positions;
  for (const auto& option : item.options) {
    const auto [context, continuation] = tmpl.split(item.question, option);
    const auto ctx = tokenizer.encode(context);
    const auto full = tokenizer.encode(context + continuation);
    std::size_t ctx_len = 0;
    while (ctx_len < ctx.size() && ctx_len < full.size() && ctx[ctx_len] == full[ctx_len]) ++ctx_len;
    if (ctx_len == 0 || ctx_len == full.size())
      throw Error(ErrorKind::MalformedDataset,
                  "item '" + item.id + "': question and option must both produce tokens");
    if (full.size() > limit)
      throw Error(ErrorKind::SequenceTooLong, "item '" + item.id + "' option prompt has " +
                                                  std::to_string(full.size()) +
                                                  " tokens (max_positions " +
                                                  std::to_string(limit) + ")");
    ForwardOptions fo;
    fo.tap = tap;
    fo.prompt_length = ctx_len;
    const auto out = forward(weights, full, fo);
    float score = 0.0f;
    for (std::size_t i = ctx_len; i < full.size(); ++i)
      score += log_prob(out.logits_row(i - 1), full[i]);
    if (options.length_normalized) score /= static_cast<float>(full.size() - ctx_len);
    result.option_scores.push_back(score);
  }
  result.chosen = argmax_lowest(result.option_scores);
  return result;
}

MCScore score_mc(const WeightStore& weights, const Tokenizer& tokenizer, const MCItem& item,
                 const PromptTemplate& tmpl, const SteeringSpec& spec,
                 const ScoreOptions& options) {
  const Intervention tap(spec, weights.spec());
  return score_mc(weights, tokenizer, item, tmpl,
                  spec.mode == SteeringMode::Off ? nullptr : &tap, options);
}

EvalRecord eval_accuracy(const WeightStore& weights, const Tokenizer& tokenizer,
                         std::span<const MCItem> items, const PromptTemplate& tmpl,
                         const SteeringSpec& spec, const ScoreOptions& options) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no multiple-choice items");
  const Intervention tap(spec, weights.spec());
  const ActivationTap* tap_ptr = spec.mode == SteeringMode::Off ? nullptr : &tap;

  std::vector<std::uint8_t> correct(items.size(), 0);
  std::vector<std::exception_ptr> errors(items.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(items.size()); ++i) {
    try {
      const auto s = score_mc(weights, tokenizer, items[i], tmpl, tap_ptr, options);
      correct[i] = s.chosen == items[i].gold_index;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto r = base_record(spec, "accuracy", items.size());
  const auto hits = std::count(correct.begin(), correct.end(), std::uint8_t{1});
  r.value = static_cast<double>(hits) / static_cast<double>(items.size());
  return r;
}

std::string normalize_answer(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c) && c < 128) continue;
    cleaned.push_back(static_cast<char>(std::tolower(c)));
  }
  std::istringstream words(cleaned);
  std::string word, out;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool exact_match(std::string_view generated, std::span<const std::string> references) {
  const auto g = normalize_answer(generated);
  return std::any_of(references.begin(), references.end(),
                     [&](const std::string& ref) { return normalize_answer(ref) == g; });
}

std::string generate_answer(const WeightStore& weights, const Tokenizer& tokenizer,
                            const QAItem& item, const PromptTemplate& tmpl,
                            const ActivationTap* tap, std::size_t max_new) {
  const auto context = tmpl.split(item.question, "").first;
  const auto prompt = tokenizer.encode(context);
  ForwardOptions fo;
  fo.tap = tap;
  const auto seq = greedy_decode(weights, prompt, max_new, fo);
  return tokenizer.decode(std::span(seq).subspan(prompt.size()));
}

EvalRecord eval_em(const WeightStore& weights, const Tokenizer& tokenizer,
                   std::span<const QAItem> items, const PromptTemplate& tmpl,
                   const SteeringSpec& spec, std::size_t max_new) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no QA items");
  const Intervention tap(spec, weights.spec());
  const ActivationTap* tap_ptr = spec.mode == SteeringMode::Off ? nullptr : &tap;

  std::vector<std::uint8_t> hit(items.size(), 0);
  std::vector<std::exception_ptr> errors(items.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(items.size()); ++i) {
    try {
      const auto text = generate_answer(weights, tokenizer, items[i], tmpl, tap_ptr, max_new);
      hit[i] = exact_match(text, items[i].answers);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  auto r = base_record(spec, "exact_match", items.size());
  const auto hits = std::count(hit.begin(), hit.end(), std::uint8_t{1});
  r.value = static_cast<double>(hits) / static_cast<double>(items.size());
  return r;
}

std::vector<EvalRecord> sweep(const WeightStore& weights, const Tokenizer& tokenizer,
                              std::span<const MCItem> items, const PromptTemplate& tmpl,
                              ElementClass element_class,
                              std::span<const InstanceDifference> diffs,
                              std::span<const std::size_t> k_grid,
                              std::span<const float> delta_grid, std::uint64_t seed,
                              const SweepOptions& options) {
  if (k_grid.empty() || delta_grid.empty())
    throw Error(ErrorKind::InvalidArgument, "sweep grids must be non-empty");
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no multiple-choice items");
  const auto mean = mean_difference(diffs);
  if (mean.element_class != element_class)
    throw Error(ErrorKind::HeterogeneousBatch, "differences were extracted for another element class");
  std::vector<IdentificationMask> masks;
  for (auto k : k_grid) masks.push_back(binarize(mean, k));

  std::vector<EvalRecord> records;
  for (const auto& mask : masks) {
    for (float delta : delta_grid) {
      SteeringSpec spec;
      spec.element_class = element_class;
      spec.mask = mask;
      spec.delta = delta;
      spec.mode = SteeringMode::Adaptive;
      spec.positions = options.positions;
      auto r = eval_accuracy(weights, tokenizer, items, tmpl, spec, options.scoring);
      r.task_id = options.task_id;
      r.variant = "sadi";
      r.seed = seed;
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<EvalRecord> AblationTable::rows() const {
  std::vector<EvalRecord> out = {sadi, random_mean, fixed, off};
  out.insert(out.end(), random_per_seed.begin(), random_per_seed.end());
  return out;
}

AblationTable ablation_battery(const WeightStore& weights, const Tokenizer& tokenizer,
                               std::span<const MCItem> items, const PromptTemplate& tmpl,
                               ElementClass element_class,
                               std::span<const InstanceDifference> diffs, std::size_t k,
                               float delta, std::span<const std::uint64_t> seeds,
                               const SweepOptions& options) {
  if (items.empty()) throw Error(ErrorKind::EmptyDataset, "no multiple-choice items");
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "ablation needs at least one seed");
  const auto mean = mean_difference(diffs);
  if (mean.element_class != element_class)
    throw Error(ErrorKind::HeterogeneousBatch, "differences were extracted for another element class");
  const auto top_mask = binarize(mean, k);

  auto run = [&](SteeringMode mode, const IdentificationMask& mask, std::string variant,
                 std::uint64_t seed) {
    SteeringSpec spec;
    spec.element_class = element_class;
    spec.mask = mask;
    spec.delta = delta;
    spec.mode = mode;
    spec.positions = options.positions;
    if (mode == SteeringMode::Fixed) spec.fixed_direction = mean;
    auto r = eval_accuracy(weights, tokenizer, items, tmpl, spec, options.scoring);
    r.task_id = options.task_id;
    r.variant = std::move(variant);
    r.seed = seed;
    return r;
  };

  AblationTable table;
  table.sadi = run(SteeringMode::Adaptive, top_mask, "sadi", 0);
  double total = 0.0;
  for (auto seed : seeds) {
    table.random_per_seed.push_back(
        run(SteeringMode::Adaptive, random_mask(mean, k, seed), "random_seed", seed));
    total += table.random_per_seed.back().value;
  }
  table.random_mean = table.random_per_seed.front();
  table.random_mean.variant = "random";
  table.random_mean.seed = 0;
  table.random_mean.value = total / static_cast<double>(seeds.size());
  table.fixed = run(SteeringMode::Fixed, top_mask, "fixed", 0);
  table.off = run(SteeringMode::Off, top_mask, "off", 0);
  return table;
}

}  // namespace sadi
