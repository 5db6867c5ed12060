#include "sadi/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace sadi::kernels {

namespace {

using Index = std::int64_t;

constexpr std::size_t kColumnBlock = 64;

// Columns [j0, j1) of one output row. Each cell still accumulates over k in
// ascending order starting from its bias, so any blocking gives the same bits.
inline void linear_block(float* out_row, const float* in_row, std::span<const float> weight,
                         std::span<const float> bias, std::size_t in_dim, std::size_t out_dim,
                         std::size_t j0, std::size_t j1) {
  for (std::size_t j = j0; j < j1; ++j) out_row[j] = bias.empty() ? 0.0f : bias[j];
  for (std::size_t k = 0; k < in_dim; ++k) {
    const float x = in_row[k];
    const float* w = weight.data() + k * out_dim;
    for (std::size_t j = j0; j < j1; ++j) out_row[j] += x * w[j];
  }
}

inline float dot(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t k = 0; k < n; ++k) acc += a[k] * b[k];
  return acc;
}

inline void layer_norm_row(float* out, const float* in, std::span<const float> gamma,
                           std::span<const float> beta, std::size_t dim, float eps) {
  float mean = 0.0f;
  for (std::size_t k = 0; k < dim; ++k) mean += in[k];
  mean /= static_cast<float>(dim);
  float var = 0.0f;
  for (std::size_t k = 0; k < dim; ++k) {
    const float c = in[k] - mean;
    var += c * c;
  }
  var /= static_cast<float>(dim);
  const float inv = 1.0f / std::sqrt(var + eps);
  for (std::size_t k = 0; k < dim; ++k) out[k] = (in[k] - mean) * inv * gamma[k] + beta[k];
}

// One (head, query position) cell of causal attention. scratch holds >= seq floats.
inline void attention_cell(float* out_row, std::span<const float> qkv, std::size_t i,
                           std::size_t h, std::size_t n_heads, std::size_t d_head,
                           float* scratch) {
  const std::size_t d_model = n_heads * d_head;
  const std::size_t stride = 3 * d_model;
  const float scale = 1.0f / std::sqrt(static_cast<float>(d_head));
  const float* q = qkv.data() + i * stride + h * d_head;
  float max_score = -INFINITY;
  for (std::size_t j = 0; j <= i; ++j) {
    const float* k = qkv.data() + j * stride + d_model + h * d_head;
    scratch[j] = dot(q, k, d_head) * scale;
    max_score = std::max(max_score, scratch[j]);
  }
  float denom = 0.0f;
  for (std::size_t j = 0; j <= i; ++j) {
    scratch[j] = std::exp(scratch[j] - max_score);
    denom += scratch[j];
  }
  float* o = out_row + h * d_head;
  std::fill(o, o + d_head, 0.0f);
  for (std::size_t j = 0; j <= i; ++j) {
    const float p = scratch[j] / denom;
    const float* v = qkv.data() + j * stride + 2 * d_model + h * d_head;
    for (std::size_t c = 0; c < d_head; ++c) o[c] += p * v[c];
  }
}

}  // namespace

float gelu(float x) {
  return 0.5f * x * (1.0f + std::tanh(kSqrt2OverPi * (x + kGeluCoeff * x * x * x)));
}

void linear(std::span<float> out, std::span<const float> in, std::span<const float> weight,
            std::span<const float> bias, std::size_t rows, std::size_t in_dim,
            std::size_t out_dim) {
  const std::size_t blocks = (out_dim + kColumnBlock - 1) / kColumnBlock;
  const Index total = static_cast<Index>(rows * blocks);
#pragma omp parallel for schedule(static)
  for (Index cell = 0; cell < total; ++cell) {
    const std::size_t r = static_cast<std::size_t>(cell) / blocks;
    const std::size_t j0 = (static_cast<std::size_t>(cell) % blocks) * kColumnBlock;
    linear_block(out.data() + r * out_dim, in.data() + r * in_dim, weight, bias, in_dim, out_dim, j0,
                 std::min(j0 + kColumnBlock, out_dim));
  }
}

void linear_transposed(std::span<float> out, std::span<const float> in,
                       std::span<const float> table, std::size_t rows, std::size_t in_dim,
                       std::size_t out_dim) {
  const Index total = static_cast<Index>(rows * out_dim);
#pragma omp parallel for schedule(static)
  for (Index cell = 0; cell < total; ++cell) {
    const std::size_t r = static_cast<std::size_t>(cell) / out_dim;
    const std::size_t v = static_cast<std::size_t>(cell) % out_dim;
    out[r * out_dim + v] = dot(in.data() + r * in_dim, table.data() + v * in_dim, in_dim);
  }
}

void layer_norm(std::span<float> out, std::span<const float> in, std::span<const float> gamma,
                std::span<const float> beta, std::size_t rows, std::size_t dim, float eps) {
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < static_cast<Index>(rows); ++r)
    layer_norm_row(out.data() + r * dim, in.data() + r * dim, gamma, beta, dim, eps);
}

void gelu_inplace(std::span<float> x) {
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < static_cast<Index>(x.size()); ++i) x[i] = gelu(x[i]);
}

void causal_attention(std::span<float> out, std::span<const float> qkv, std::size_t seq,
                      std::size_t n_heads, std::size_t d_head) {
  const std::size_t d_model = n_heads * d_head;
  const Index total = static_cast<Index>(seq * n_heads);
#pragma omp parallel
  {
    std::vector<float> scratch(seq);
#pragma omp for schedule(static)
    for (Index cell = 0; cell < total; ++cell) {
      const std::size_t i = static_cast<std::size_t>(cell) / n_heads;
      const std::size_t h = static_cast<std::size_t>(cell) % n_heads;
      attention_cell(out.data() + i * d_model, qkv, i, h, n_heads, d_head, scratch.data());
    }
  }
}

namespace serial {

void linear(std::span<float> out, std::span<const float> in, std::span<const float> weight,
            std::span<const float> bias, std::size_t rows, std::size_t in_dim,
            std::size_t out_dim) {
  for (std::size_t r = 0; r < rows; ++r)
    linear_block(out.data() + r * out_dim, in.data() + r * in_dim, weight, bias, in_dim, out_dim, 0,
                 out_dim);
}

void linear_transposed(std::span<float> out, std::span<const float> in,
                       std::span<const float> table, std::size_t rows, std::size_t in_dim,
                       std::size_t out_dim) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t v = 0; v < out_dim; ++v)
      out[r * out_dim + v] = dot(in.data() + r * in_dim, table.data() + v * in_dim, in_dim);
}

void layer_norm(std::span<float> out, std::span<const float> in, std::span<const float> gamma,
                std::span<const float> beta, std::size_t rows, std::size_t dim, float eps) {
  for (std::size_t r = 0; r < rows; ++r)
    layer_norm_row(out.data() + r * dim, in.data() + r * dim, gamma, beta, dim, eps);
}

void gelu_inplace(std::span<float> x) {
  for (auto& v : x) v = gelu(v);
}

void causal_attention(std::span<float> out, std::span<const float> qkv, std::size_t seq,
                      std::size_t n_heads, std::size_t d_head) {
  const std::size_t d_model = n_heads * d_head;
  std::vector<float> scratch(seq);
  for (std::size_t i = 0; i < seq; ++i)
    for (std::size_t h = 0; h < n_heads; ++h)
      attention_cell(out.data() + i * d_model, qkv, i, h, n_heads, d_head, scratch.data());
}

}  // namespace serial

}  // namespace sadi::kernels
