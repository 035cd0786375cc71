#include "gog/param_store.hpp"

#include <algorithm>
#include <cmath>

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

double Rng::uniform() {
  // 53 random bits into [0, 1)
  return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

int Rng::uniform_int(int n) {
  // modulo bias is irrelevant at these ranges
  return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Tensor& ParamStore::create(const std::string& name, int rows, int cols, Init init, bool trainable) {
  if (entries_.count(name)) {
    throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  }
  Tensor t = zeros(rows, cols, /*requires_grad=*/trainable);
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      for (auto& v : *t.data) v = 1.0;
      break;
    case Init::UniformFanIn: {
      Rng rng(seed_ ^ fnv1a64(name));
      const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
      for (auto& v : *t.data) v = rng.uniform(-bound, bound);
      break;
    }
  }
  auto [it, ok] = entries_.emplace(name, Entry{std::move(t), trainable});
  (void)ok;
  return it->second.value;
}

Tensor& ParamStore::create_raw(const std::string& name, int rows, int cols, bool trainable,
                               std::vector<double> values) {
  if (entries_.count(name)) {
    throw ConfigError("ParamStore: duplicate parameter '" + name + "'");
  }
  Tensor t = zeros(rows, cols, /*requires_grad=*/trainable);
  if (values.size() != t.numel()) {
    throw DimensionError("ParamStore: value count mismatch for '" + name + "'");
  }
  *t.data = std::move(values);
  auto [it, ok] = entries_.emplace(name, Entry{std::move(t), trainable});
  (void)ok;
  return it->second.value;
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  }
  return it->second.value;
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) {
    throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  }
  return it->second.value;
}

bool ParamStore::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("ParamStore: unknown parameter '" + name + "'");
  return it->second.trainable;
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) {
    if (e.value.grad) std::fill(e.value.grad->begin(), e.value.grad->end(), 0.0);
  }
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [name, e] : entries_) {
    if (!e.trainable || !e.value.grad) continue;
    for (double g : *e.value.grad) s += g * g;
  }
  return std::sqrt(s);
}

void ParamStore::scale_grads(double s) {
  for (auto& [name, e] : entries_) {
    if (!e.trainable || !e.value.grad) continue;
    for (double& g : *e.value.grad) g *= s;
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_params() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.numel();
  return n;
}

Tensor linear(const Tensor& x, const std::string& weight_name, const std::string& bias_name,
              ParamStore& store) {
  const Tensor& w = store.get(weight_name);
  if (x.cols != w.rows) {
    throw DimensionError("linear: input " + std::to_string(x.rows) + "x" + std::to_string(x.cols) +
                         " against weight '" + weight_name + "' " + std::to_string(w.rows) + "x" +
                         std::to_string(w.cols));
  }
  Tensor y = matmul(x, w);
  if (!bias_name.empty()) y = add_rowvec(y, store.get(bias_name));
  return y;
}

Tensor linear(const Tensor& x, const std::string& weight_name, ParamStore& store) {
  return linear(x, weight_name, "", store);
}

Tensor layer_norm(const Tensor& x, const std::string& gain_name, const std::string& shift_name,
                  ParamStore& store, double eps) {
  return layer_norm_rows(x, store.get(gain_name), store.get(shift_name), eps);
}

}  // namespace gog
