#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace gog {

struct TensorNode;

/// Dense row-major matrix of doubles with an optional gradient buffer and
/// tape record. Copying a Tensor copies the handle, not the storage.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::shared_ptr<std::vector<double>> data;
  std::shared_ptr<std::vector<double>> grad;  // non-null iff requires_grad
  std::shared_ptr<TensorNode> node;           // non-null iff recorded on tape
  bool requires_grad = false;

  bool defined() const { return static_cast<bool>(data); }
  std::size_t numel() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
  double at(int r, int c) const { return (*data)[static_cast<std::size_t>(r) * cols + c]; }
  double& mut(int r, int c) { return (*data)[static_cast<std::size_t>(r) * cols + c]; }
  double scalar() const;  // value of a 1x1 tensor
};

struct TensorNode {
  std::vector<Tensor> parents;
  std::function<void(const Tensor&)> backward;
};

bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

Tensor zeros(int rows, int cols, bool requires_grad = false);
Tensor full(int rows, int cols, double value);
Tensor from_values(int rows, int cols, std::vector<double> values);
Tensor from_rows(const std::vector<std::vector<double>>& rows_in);

/// Reverse-mode accumulation from a 1x1 loss into every reachable grad buffer.
void backward(const Tensor& loss);

/// Throws NumericalError if any entry is NaN/Inf. Called by every kernel.
void check_finite(const Tensor& t, const char* where);

}  // namespace gog
