#include "sadi/mask.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi {

using json = nlohmann::json;

std::size_t IdentificationMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<std::size_t> IdentificationMask::set_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) idx.push_back(i);
  return idx;
}

MeanDifference mean_difference(std::span<const InstanceDifference> diffs) {
  if (diffs.empty()) throw Error(ErrorKind::EmptyBatch, "no instance differences to average");
  const auto& first = diffs.front();
  if (first.per_layer.empty())
    throw Error(ErrorKind::HeterogeneousBatch, "instance '" + first.id + "' has no layers");
  MeanDifference mean;
  mean.element_class = first.element_class;
  mean.n_layers = first.per_layer.size();
  mean.layer_width = first.per_layer.front().size();
  mean.units_per_layer = first.units_per_layer;
  mean.n_instances = diffs.size();
  if (mean.units_per_layer == 0 || mean.layer_width % mean.units_per_layer != 0)
    throw Error(ErrorKind::HeterogeneousBatch, "layer width is not a multiple of units_per_layer");

  for (const auto& d : diffs) {
    bool ok = d.element_class == mean.element_class && d.per_layer.size() == mean.n_layers &&
              d.units_per_layer == mean.units_per_layer;
    for (const auto& layer : d.per_layer) ok = ok && layer.size() == mean.layer_width;
    if (!ok)
      throw Error(ErrorKind::HeterogeneousBatch,
                  "instance '" + d.id + "' differs in element class or layout from '" + first.id + "'");
  }

  // Each entry is summed in ascending value order, which makes the result
  // independent of instance order.
  const float n = static_cast<float>(diffs.size());
  mean.values.resize(mean.n_layers * mean.layer_width);
  std::vector<float> column(diffs.size());
  for (std::size_t l = 0; l < mean.n_layers; ++l) {
    for (std::size_t m = 0; m < mean.layer_width; ++m) {
      for (std::size_t i = 0; i < diffs.size(); ++i) column[i] = diffs[i].per_layer[l][m];
      std::sort(column.begin(), column.end());
      float acc = 0.0f;
      for (float v : column) acc += v;
      mean.values[l * mean.layer_width + m] = acc / n;
    }
  }
  return mean;
}

std::vector<float> unit_scores(const MeanDifference& mean, Ranking ranking) {
  const std::size_t total = mean.total_units();
  const std::size_t uw = mean.unit_width();
  std::vector<float> scores(total);
  if (unit_kind_for(mean.element_class) == UnitKind::HeadVector) {
    for (std::size_t u = 0; u < total; ++u) {
      float ss = 0.0f;
      for (std::size_t c = 0; c < uw; ++c) {
        const float v = mean.values[u * uw + c];
        ss += v * v;
      }
      scores[u] = std::sqrt(ss);
    }
  } else {
    for (std::size_t u = 0; u < total; ++u)
      scores[u] = ranking == Ranking::Signed ? mean.values[u] : std::fabs(mean.values[u]);
  }
  return scores;
}

std::vector<std::size_t> top_indices(std::span<const float> scores, std::size_t top) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  top = std::min(top, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(top), order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  order.resize(top);
  return order;
}

namespace {

IdentificationMask empty_mask_like(const MeanDifference& mean, std::size_t k) {
  const std::size_t total = mean.total_units();
  if (total == 0) throw Error(ErrorKind::KOutOfRange, "mean difference has no units");
  if (k < 1 || k > total)
    throw Error(ErrorKind::KOutOfRange,
                "K=" + std::to_string(k) + " outside [1, " + std::to_string(total) + "]");
  IdentificationMask mask;
  mask.element_class = mean.element_class;
  mask.unit = unit_kind_for(mean.element_class);
  mask.n_layers = mean.n_layers;
  mask.units_per_layer = mean.units_per_layer;
  mask.k = k;
  mask.bits.assign(total, 0);
  return mask;
}

}  // namespace

IdentificationMask binarize(const MeanDifference& mean, std::size_t k, Ranking ranking) {
  auto mask = empty_mask_like(mean, k);
  for (auto u : top_indices(unit_scores(mean, ranking), k)) mask.bits[u] = 1;
  return mask;
}

IdentificationMask random_mask(const MeanDifference& shape, std::size_t k, std::uint64_t seed) {
  auto mask = empty_mask_like(shape, k);
  // Partial Fisher-Yates over the raw engine output; std distributions are
  // implementation-defined and would break cross-platform determinism.
  std::mt19937_64 rng(seed);
  auto below = [&](std::uint64_t bound) {
    const std::uint64_t limit = std::mt19937_64::max() - std::mt19937_64::max() % bound;
    std::uint64_t r;
    do r = rng(); while (r >= limit);
    return r % bound;
  };
  std::vector<std::size_t> pool(mask.total_units());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    mask.bits[pool[i]] = 1;
  }
  return mask;
}

std::string mask_to_json(const IdentificationMask& mask) {
  json j = {{"element_class", element_class_name(mask.element_class)},
            {"K", mask.k},
            {"unit", mask.unit == UnitKind::HeadVector ? "head_vector" : "scalar"},
            {"L", mask.n_layers},
            {"units_per_layer", mask.units_per_layer},
            {"set_indices", mask.set_indices()}};
  return j.dump(2);
}

IdentificationMask mask_from_json(const std::string& text) {
  auto corrupt = [](const std::string& what) { throw Error(ErrorKind::CorruptMaskFile, what); };
  IdentificationMask mask;
  try {
    const auto j = json::parse(text);
    const auto cls = parse_element_class(j.at("element_class").get<std::string>());
    if (!cls) corrupt("unknown element_class");
    mask.element_class = *cls;
    const auto unit = j.at("unit").get<std::string>();
    if (unit != "scalar" && unit != "head_vector") corrupt("unknown unit '" + unit + "'");
    mask.unit = unit == "head_vector" ? UnitKind::HeadVector : UnitKind::Scalar;
    if (mask.unit != unit_kind_for(mask.element_class))
      corrupt("unit does not match element_class");
    mask.k = j.at("K").get<std::size_t>();
    mask.n_layers = j.at("L").get<std::size_t>();
    mask.units_per_layer = j.at("units_per_layer").get<std::size_t>();
    mask.bits.assign(mask.total_units(), 0);
    std::set<std::size_t> seen;
    for (auto idx : j.at("set_indices").get<std::vector<std::size_t>>()) {
      if (idx >= mask.total_units()) corrupt("index " + std::to_string(idx) + " out of range");
      if (!seen.insert(idx).second) corrupt("duplicate index " + std::to_string(idx));
      mask.bits[idx] = 1;
    }
  } catch (const json::exception& e) {
    corrupt(std::string("mask file is malformed: ") + e.what());
  }
  if (mask.popcount() != mask.k)
    corrupt("popcount " + std::to_string(mask.popcount()) + " != K " + std::to_string(mask.k));
  if (mask.k == 0) corrupt("K must be >= 1");
  return mask;
}

void save_mask(const IdentificationMask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot write " + path.string());
  out << mask_to_json(mask) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "short write to " + path.string());
}

IdentificationMask load_mask(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return mask_from_json(ss.str());
}

}  // namespace sadi
