#include "sadi/contrastive.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"
#include "sadi/tensor_file.hpp"

namespace sadi {

using json = nlohmann::json;

namespace {

constexpr std::string_view kQuestionSlot = "{q}";
constexpr std::string_view kAnswerSlot = "{a}";

std::size_t count_occurrences(std::string_view text, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string_view::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string layer_tensor_name(const std::string& id, std::size_t l) {
  return "diff/" + id + "/layer" + std::to_string(l);
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string text)
    : name_(std::move(name)), text_(std::move(text)) {
  const auto nq = count_occurrences(text_, kQuestionSlot);
  const auto na = count_occurrences(text_, kAnswerSlot);
  if (nq != 1 || na != 1)
    throw Error(ErrorKind::TemplateSlotMissing,
                "template '" + name_ + "' needs exactly one {q} and one {a} (found " +
                    std::to_string(nq) + " and " + std::to_string(na) + ")");
}

std::string PromptTemplate::render(std::string_view question, std::string_view answer) const {
  auto [context, continuation] = split(question, answer);
  return context + continuation;
}

std::pair<std::string, std::string> PromptTemplate::split(std::string_view question,
                                                          std::string_view answer) const {
  const std::string_view t = text_;
  const auto apos = t.find(kAnswerSlot);
  auto fill = [&](std::string_view segment) {
    std::string out;
    const auto p = segment.find(kQuestionSlot);
    if (p == std::string_view::npos) return std::string(segment);
    out.append(segment.substr(0, p));
    out.append(question);
    out.append(segment.substr(p + kQuestionSlot.size()));
    return out;
  };
  std::string context = fill(t.substr(0, apos));
  std::string continuation(answer);
  continuation += fill(t.substr(apos + kAnswerSlot.size()));
  std::size_t keep = context.size();
  while (keep > 0 && (context[keep - 1] == ' ' || context[keep - 1] == '\t')) --keep;
  continuation.insert(0, context.substr(keep));
  context.resize(keep);
  return {context, continuation};
}

PromptTemplate builtin_template(std::string_view name) {
  if (name == "mc") return PromptTemplate("mc", "{q} {a}");
  if (name == "qa") return PromptTemplate("qa", "Q: {q}\nA: {a}");
  throw Error(ErrorKind::UnknownTemplate, "no built-in template named '" + std::string(name) + "'");
}

std::vector<std::string> builtin_template_names() { return {"mc", "qa"}; }

ContrastivePair blank_negative_pair(std::string id, std::string question, std::string answer) {
  return ContrastivePair{std::move(id), std::move(question), std::move(answer),
                         std::string(kBlankAnswer)};
}

std::pair<std::string, std::string> build_prompts(const ContrastivePair& pair,
                                                  const PromptTemplate& tmpl) {
  return {tmpl.render(pair.question, pair.positive), tmpl.render(pair.question, pair.negative)};
}

std::vector<ContrastivePair> parse_pairs_jsonl(const std::string& text) {
  std::vector<ContrastivePair> pairs;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto bad = [&](const std::string& what) {
      throw Error(ErrorKind::MalformedDataset, "line " + std::to_string(lineno) + ": " + what);
    };
    ContrastivePair p;
    try {
      const auto j = json::parse(line);
      p.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
      p.question = j.at("question").get<std::string>();
      p.positive = j.at("positive").get<std::string>();
      p.negative = j.at("negative").get<std::string>();
    } catch (const json::exception& e) {
      bad(e.what());
    }
    if (p.id.empty() || p.question.empty() || p.positive.empty() || p.negative.empty())
      bad("fields must be non-empty");
    if (p.positive == p.negative) bad("positive and negative answers are identical");
    if (!ids.insert(p.id).second) bad("duplicate id '" + p.id + "'");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<ContrastivePair> read_pairs_jsonl(const std::filesystem::path& path) {
  return parse_pairs_jsonl(slurp(path));
}

InstanceDifference extract_difference(const WeightStore& weights, const Tokenizer& tokenizer,
                                      const ContrastivePair& pair, const PromptTemplate& tmpl,
                                      ElementClass element_class) {
  const auto [pos_text, neg_text] = build_prompts(pair, tmpl);
  const auto pos_tokens = tokenizer.encode(pos_text);
  const auto neg_tokens = tokenizer.encode(neg_text);
  const std::size_t limit = weights.spec().max_positions;
  for (const auto& [side, tokens] : {std::pair{"positive", &pos_tokens}, std::pair{"negative", &neg_tokens}})
    if (tokens->empty() || tokens->size() > limit)
      throw Error(ErrorKind::SequenceTooLong,
                  std::string(side) + " prompt of pair '" + pair.id + "' has " +
                      std::to_string(tokens->size()) + " tokens (max_positions " +
                      std::to_string(limit) + ")");

  const auto pos = forward(weights, pos_tokens);
  const auto neg = forward(weights, neg_tokens);
  const auto& a = pos.trace(element_class).per_layer;
  const auto& b = neg.trace(element_class).per_layer;

  InstanceDifference diff;
  diff.id = pair.id;
  diff.element_class = element_class;
  diff.units_per_layer = weights.spec().units_per_layer(element_class);
  diff.per_layer.resize(a.size());
  for (std::size_t l = 0; l < a.size(); ++l) {
    diff.per_layer[l].resize(a[l].size());
    for (std::size_t m = 0; m < a[l].size(); ++m) diff.per_layer[l][m] = a[l][m] - b[l][m];
  }
  return diff;
}

std::vector<InstanceDifference> extract_differences(const WeightStore& weights,
                                                    const Tokenizer& tokenizer,
                                                    std::span<const ContrastivePair> pairs,
                                                    const PromptTemplate& tmpl,
                                                    ElementClass element_class) {
  std::vector<InstanceDifference> out(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(pairs.size()); ++i) {
    try {
      out[i] = extract_difference(weights, tokenizer, pairs[i], tmpl, element_class);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

void dump_traces(std::span<const InstanceDifference> diffs, const std::filesystem::path& dir) {
  if (diffs.empty()) throw Error(ErrorKind::EmptyBatch, "no differences to dump");
  const auto& first = diffs.front();
  std::vector<std::size_t> widths;
  for (const auto& layer : first.per_layer) widths.push_back(layer.size());

  TensorContainer c;
  json ids = json::array();
  for (const auto& d : diffs) {
    bool same = d.element_class == first.element_class &&
                d.per_layer.size() == first.per_layer.size() &&
                d.units_per_layer == first.units_per_layer;
    for (std::size_t l = 0; same && l < d.per_layer.size(); ++l)
      same = d.per_layer[l].size() == widths[l];
    if (!same)
      throw Error(ErrorKind::HeterogeneousBatch,
                  "instance '" + d.id + "' does not share element class and layout with '" +
                      first.id + "'");
    for (std::size_t l = 0; l < d.per_layer.size(); ++l) {
      auto [it, inserted] =
          c.tensors.emplace(layer_tensor_name(d.id, l), Tensor{{widths[l]}, d.per_layer[l]});
      if (!inserted) throw Error(ErrorKind::HeterogeneousBatch, "duplicate instance id '" + d.id + "'");
    }
    ids.push_back(d.id);
  }
  c.metadata["element_class"] = std::string(element_class_name(first.element_class));

  json manifest = {{"count", diffs.size()},
                   {"element_class", element_class_name(first.element_class)},
                   {"n_layers", first.per_layer.size()},
                   {"units_per_layer", first.units_per_layer},
                   {"widths", widths},
                   {"ids", ids}};
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
  write_tensor_file(dir / "diffs.safetensors", c);
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "short write to manifest.json");
}

std::vector<InstanceDifference> load_traces(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(slurp(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedContainer, std::string("manifest.json: ") + e.what());
  }
  const auto container = read_tensor_file(dir / "diffs.safetensors");
  std::vector<InstanceDifference> out;
  try {
    const auto cls = parse_element_class(manifest.at("element_class").get<std::string>());
    if (!cls) throw Error(ErrorKind::MalformedContainer, "manifest has unknown element_class");
    const auto n_layers = manifest.at("n_layers").get<std::size_t>();
    const auto units = manifest.at("units_per_layer").get<std::size_t>();
    const auto widths = manifest.at("widths").get<std::vector<std::size_t>>();
    const auto ids = manifest.at("ids").get<std::vector<std::string>>();
    if (ids.size() != manifest.at("count").get<std::size_t>() || widths.size() != n_layers)
      throw Error(ErrorKind::MalformedContainer, "manifest count/widths are inconsistent");
    for (const auto& id : ids) {
      InstanceDifference d;
      d.id = id;
      d.element_class = *cls;
      d.units_per_layer = units;
      for (std::size_t l = 0; l < n_layers; ++l) {
        auto it = container.tensors.find(layer_tensor_name(id, l));
        if (it == container.tensors.end())
          throw Error(ErrorKind::MissingTensor, layer_tensor_name(id, l));
        if (it->second.data.size() != widths[l])
          throw Error(ErrorKind::ShapeMismatch, layer_tensor_name(id, l));
        d.per_layer.push_back(it->second.data);
      }
      out.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedContainer, std::string("manifest.json: ") + e.what());
  }
  return out;
}

}  // namespace sadi
