#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sadi/difference.hpp"
#include "sadi/model.hpp"
#include "sadi/tokenizer.hpp"

namespace sadi {

struct ContrastivePair {
  std::string id;
  std::string question;
  std::string positive;
  std::string negative;
};

// Prompt template with exactly one "{q}" and one "{a}" slot. Everything else
// is literal; no whitespace is inserted implicitly.
class PromptTemplate {
 public:
  // Throws Error{TemplateSlotMissing}.
  PromptTemplate(std::string name, std::string text);

  const std::string& name() const { return name_; }
  const std::string& text() const { return text_; }

  std::string render(std::string_view question, std::string_view answer) const;

  // Splits a rendered prompt into the part before the answer slot and the
  // rest. Whitespace at the end of the context moves into the continuation
  // so that leading-space tokens are not split at the boundary.
  std::pair<std::string, std::string> split(std::string_view question,
                                            std::string_view answer) const;

 private:
  std::string name_;
  std::string text_;
};

// Built-ins: "mc" = "{q} {a}" (question + candidate continuation) and
// "qa" = "Q: {q}\nA: {a}". Throws Error{UnknownTemplate}.
PromptTemplate builtin_template(std::string_view name);
std::vector<std::string> builtin_template_names();

// The negative answer of a QA-style pair is a single space.
inline constexpr std::string_view kBlankAnswer = " ";
ContrastivePair blank_negative_pair(std::string id, std::string question, std::string answer);

std::pair<std::string, std::string> build_prompts(const ContrastivePair& pair,
                                                  const PromptTemplate& tmpl);

// JSONL, one {id, question, positive, negative} per line. Throws
// MalformedDataset (with line number) on invalid records.
std::vector<ContrastivePair> parse_pairs_jsonl(const std::string& text);
std::vector<ContrastivePair> read_pairs_jsonl(const std::filesystem::path& path);

// Last-token activation of the positive prompt minus that of the negative
// prompt, per layer. Throws SequenceTooLong naming the offending side.
InstanceDifference extract_difference(const WeightStore& weights, const Tokenizer& tokenizer,
                                      const ContrastivePair& pair, const PromptTemplate& tmpl,
                                      ElementClass element_class);

// Runs extract_difference over all pairs (in parallel), output in input order.
std::vector<InstanceDifference> extract_differences(const WeightStore& weights,
                                                    const Tokenizer& tokenizer,
                                                    std::span<const ContrastivePair> pairs,
                                                    const PromptTemplate& tmpl,
                                                    ElementClass element_class);

// Writes <dir>/diffs.safetensors (tensors "diff/{id}/layer{l}") and
// <dir>/manifest.json. Throws HeterogeneousBatch, IoFailure.
void dump_traces(std::span<const InstanceDifference> differences,
                 const std::filesystem::path& dir);
std::vector<InstanceDifference> load_traces(const std::filesystem::path& dir);

}  // namespace sadi
