#pragma once

// Dense float32 kernels behind the forward pass. The default entry points
// parallelize the independent outer loops with OpenMP; sadi::kernels::serial
// holds the single-threaded reference kept for parity tests and the
// benchmark. Each output element is reduced in the same fixed order in both
// versions, so results are bitwise identical for any thread count.

#include <cstddef>
#include <span>

namespace sadi::kernels {

// GELU, tanh approximation:
//   0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
inline constexpr float kGeluCoeff = 0.044715f;
inline constexpr float kSqrt2OverPi = 0.7978845608028654f;

float gelu(float x);

// out[r, j] = bias[j] + sum_k in[r, k] * weight[k, j]
// weight is [in_dim x out_dim] (input-major, GPT-2 Conv1D layout).
// bias may be empty.
void linear(std::span<float> out, std::span<const float> in, std::span<const float> weight,
            std::span<const float> bias, std::size_t rows, std::size_t in_dim,
            std::size_t out_dim);

// out[r, v] = sum_k in[r, k] * table[v, k]   (tied unembedding)
void linear_transposed(std::span<float> out, std::span<const float> in,
                       std::span<const float> table, std::size_t rows, std::size_t in_dim,
                       std::size_t out_dim);

void layer_norm(std::span<float> out, std::span<const float> in, std::span<const float> gamma,
                std::span<const float> beta, std::size_t rows, std::size_t dim, float eps);

void gelu_inplace(std::span<float> x);

// qkv is [seq x 3*d_model] laid out as [q | k | v], each split into heads.
// out is [seq x d_model], head h occupying columns [h*d_head, (h+1)*d_head).
void causal_attention(std::span<float> out, std::span<const float> qkv, std::size_t seq,
                      std::size_t n_heads, std::size_t d_head);

namespace serial {

void linear(std::span<float> out, std::span<const float> in, std::span<const float> weight,
            std::span<const float> bias, std::size_t rows, std::size_t in_dim,
            std::size_t out_dim);
void linear_transposed(std::span<float> out, std::span<const float> in,
                       std::span<const float> table, std::size_t rows, std::size_t in_dim,
                       std::size_t out_dim);
void layer_norm(std::span<float> out, std::span<const float> in, std::span<const float> gamma,
                std::span<const float> beta, std::size_t rows, std::size_t dim, float eps);
void gelu_inplace(std::span<float> x);
void causal_attention(std::span<float> out, std::span<const float> qkv, std::size_t seq,
                      std::size_t n_heads, std::size_t d_head);

}  // namespace serial

}  // namespace sadi::kernels
