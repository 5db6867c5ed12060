#include "sadi/analysis.hpp"

#include <sstream>

#include "sadi/error.hpp"

namespace sadi {

std::string HeatmapTable::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "layer,unit,score\n";
  for (const auto& r : rows) os << r.layer << ',' << r.unit << ',' << r.score << '\n';
  return os.str();
}

HeatmapTable difference_heatmap(const MeanDifference& mean) {
  if (mean.values.size() != mean.n_layers * mean.layer_width || mean.units_per_layer == 0)
    throw Error(ErrorKind::InvalidArgument, "mean difference layout is inconsistent");
  const auto scores = unit_scores(mean);
  HeatmapTable t;
  t.rows.reserve(scores.size());
  for (std::size_t u = 0; u < scores.size(); ++u)
    t.rows.push_back({u / mean.units_per_layer, u % mean.units_per_layer, scores[u]});
  return t;
}

std::vector<std::size_t> topk_layer_histogram(const MeanDifference& mean, std::size_t top) {
  const std::size_t total = mean.total_units();
  if (top < 1 || top > total)
    throw Error(ErrorKind::KOutOfRange,
                "top=" + std::to_string(top) + " outside [1, " + std::to_string(total) + "]");
  std::vector<std::size_t> counts(mean.n_layers, 0);
  for (auto u : top_indices(unit_scores(mean), top)) ++counts[u / mean.units_per_layer];
  return counts;
}

std::string histogram_to_csv(const std::vector<std::size_t>& counts) {
  std::ostringstream os;
  os << "layer,count\n";
  for (std::size_t l = 0; l < counts.size(); ++l) os << l << ',' << counts[l] << '\n';
  return os.str();
}

std::string OverlapMatrix::to_csv() const {
  std::ostringstream os;
  os.precision(9);
  os << "task";
  for (const auto& t : tasks) os << ',' << t;
  os << '\n';
  for (std::size_t a = 0; a < tasks.size(); ++a) {
    os << tasks[a];
    for (std::size_t b = 0; b < tasks.size(); ++b) os << ',' << at(a, b);
    os << '\n';
  }
  return os.str();
}

OverlapMatrix mask_overlap(const std::map<std::string, IdentificationMask>& masks) {
  OverlapMatrix m;
  if (masks.empty()) return m;
  const auto& ref = masks.begin()->second;
  for (const auto& [task, mask] : masks) {
    if (mask.element_class != ref.element_class || mask.unit != ref.unit ||
        mask.n_layers != ref.n_layers || mask.units_per_layer != ref.units_per_layer ||
        mask.k != ref.k || mask.bits.size() != ref.bits.size())
      throw Error(ErrorKind::HeterogeneousMasks,
                  "mask '" + task + "' differs from '" + masks.begin()->first +
                      "' in element class, layout or K");
    m.tasks.push_back(task);
  }
  const std::size_t n = m.tasks.size();
  m.values.assign(n * n, 0.0);
  std::size_t a = 0;
  for (auto ia = masks.begin(); ia != masks.end(); ++ia, ++a) {
    std::size_t b = 0;
    for (auto ib = masks.begin(); ib != masks.end(); ++ib, ++b) {
      std::size_t shared = 0;
      for (std::size_t u = 0; u < ref.bits.size(); ++u)
        shared += ia->second.bits[u] & ib->second.bits[u];
      m.values[a * n + b] = static_cast<double>(shared) / static_cast<double>(ref.k);
    }
  }
  return m;
}

}  // namespace sadi
