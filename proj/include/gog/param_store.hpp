#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "gog/tensor.hpp"

namespace gog {

/// Deterministic generator: mt19937_64 bits mapped to doubles by hand, so
/// streams are identical across standard libraries (std distributions are
/// implementation-defined, the engine itself is normative).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next_u64() { return engine_(); }
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double gaussian();                     // Box-Muller
  int uniform_int(int n);                // [0, n)

 private:
  std::mt19937_64 engine_;
};

std::uint64_t fnv1a64(const std::string& s);

enum class Init { UniformFanIn, Zeros, Ones };

/// Named registry of trainable matrices with gradient slots. Initialization
/// of each entry is a pure function of (name, shape, store seed).
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Tensor& create(const std::string& name, int rows, int cols, Init init = Init::UniformFanIn,
                 bool trainable = true);
  Tensor& create_raw(const std::string& name, int rows, int cols, bool trainable,
                     std::vector<double> values);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  bool trainable(const std::string& name) const;

  void zero_grads();
  double grad_norm() const;       // global L2 norm over trainable entries
  void scale_grads(double s);

  std::uint64_t seed() const { return seed_; }
  std::vector<std::string> names() const;
  std::size_t total_params() const;

 private:
  struct Entry {
    Tensor value;
    bool trainable;
  };
  std::map<std::string, Entry> entries_;
  std::uint64_t seed_;
};

/// y = x * W (+ bias broadcast over rows). The weight must already exist.
Tensor linear(const Tensor& x, const std::string& weight_name, const std::string& bias_name,
              ParamStore& store);
Tensor linear(const Tensor& x, const std::string& weight_name, ParamStore& store);

/// Named-parameter wrapper around layer_norm_rows.
Tensor layer_norm(const Tensor& x, const std::string& gain_name, const std::string& shift_name,
                  ParamStore& store, double eps = 1e-5);

}  // namespace gog
