#include "reference_model.hpp"

#include <cmath>

namespace ref {

namespace {

const std::vector<float>& T(const sadi::TensorMap& t, const std::string& name) {
  return t.at(name).data;
}

std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<float>& g,
                               const std::vector<float>& b, double eps) {
  double mean = 0;
  for (double v : x) mean += v;
  mean /= x.size();
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + eps) * g[i] + b[i];
  return y;
}

// y = x W + b with W stored [in][out].
std::vector<double> affine(const std::vector<double>& x, const std::vector<float>& w,
                           const std::vector<float>& b) {
  const std::size_t out = b.size();
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < out; ++j) y[j] += x[i] * w[i * out + j];
  return y;
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

}  // namespace

Result forward(const sadi::ModelSpec& spec, const sadi::TensorMap& t,
               const std::vector<sadi::TokenId>& tokens) {
  const std::size_t n = tokens.size(), d = spec.d_model, H = spec.n_heads, dh = d / H;
  const double eps = spec.layernorm_epsilon;
  const auto& wte = T(t, "wte");
  const auto& wpe = T(t, "wpe");

  Matrix x(n, std::vector<double>(d));
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t k = 0; k < d; ++k) x[p][k] = double(wte[tokens[p] * d + k]) + wpe[p * d + k];

  Result r;
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    const std::string pre = "h." + std::to_string(l) + ".";
    Matrix q(n), k(n), v(n);
    for (std::size_t p = 0; p < n; ++p) {
      auto h = layer_norm(x[p], T(t, pre + "ln_1.weight"), T(t, pre + "ln_1.bias"), eps);
      auto qkv = affine(h, T(t, pre + "attn.c_attn.weight"), T(t, pre + "attn.c_attn.bias"));
      q[p].assign(qkv.begin(), qkv.begin() + d);
      k[p].assign(qkv.begin() + d, qkv.begin() + 2 * d);
      v[p].assign(qkv.begin() + 2 * d, qkv.end());
    }
    Matrix heads(n, std::vector<double>(d, 0.0));
    for (std::size_t hd = 0; hd < H; ++hd) {
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> w(i + 1);
        double mx = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0;
          for (std::size_t c = 0; c < dh; ++c) s += q[i][hd * dh + c] * k[j][hd * dh + c];
          w[j] = s / std::sqrt(double(dh));
          mx = std::max(mx, w[j]);
        }
        double z = 0;
        for (auto& e : w) z += (e = std::exp(e - mx));
        for (std::size_t j = 0; j <= i; ++j)
          for (std::size_t c = 0; c < dh; ++c) heads[i][hd * dh + c] += w[j] / z * v[j][hd * dh + c];
      }
    }
    Matrix neurons(n);
    for (std::size_t p = 0; p < n; ++p) {
      auto a = affine(heads[p], T(t, pre + "attn.c_proj.weight"), T(t, pre + "attn.c_proj.bias"));
      for (std::size_t c = 0; c < d; ++c) x[p][c] += a[c];
      auto h = layer_norm(x[p], T(t, pre + "ln_2.weight"), T(t, pre + "ln_2.bias"), eps);
      auto f = affine(h, T(t, pre + "mlp.c_fc.weight"), T(t, pre + "mlp.c_fc.bias"));
      for (auto& e : f) e = gelu(e);
      neurons[p] = f;
      auto o = affine(f, T(t, pre + "mlp.c_proj.weight"), T(t, pre + "mlp.c_proj.bias"));
      for (std::size_t c = 0; c < d; ++c) x[p][c] += o[c];
    }
    r.sites[0].push_back(x);
    r.sites[1].push_back(heads);
    r.sites[2].push_back(neurons);
  }

  r.logits.assign(n, std::vector<double>(spec.vocab_size, 0.0));
  for (std::size_t p = 0; p < n; ++p) {
    auto h = layer_norm(x[p], T(t, "ln_f.weight"), T(t, "ln_f.bias"), eps);
    for (std::size_t tok = 0; tok < spec.vocab_size; ++tok) {
      double s = 0;
      for (std::size_t c = 0; c < d; ++c) s += h[c] * wte[tok * d + c];
      r.logits[p][tok] = s;
    }
  }
  return r;
}

double continuation_logprob(const Result& r, const std::vector<sadi::TokenId>& tokens,
                            std::size_t from) {
  double total = 0;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const auto& row = r.logits[i - 1];
    double mx = -1e300;
    for (double v : row) mx = std::max(mx, v);
    double z = 0;
    for (double v : row) z += std::exp(v - mx);
    total += row[tokens[i]] - mx - std::log(z);
  }
  return total;
}

}  // namespace ref
