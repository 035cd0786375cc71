#include "gog/tensor.hpp"

#include <cmath>
#include <unordered_set>

#include "gog/error.hpp"

namespace gog {

namespace {
bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

double Tensor::scalar() const {
  if (rows != 1 || cols != 1) {
    throw DimensionError("scalar(): tensor is " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  return (*data)[0];
}

Tensor zeros(int rows, int cols, bool requires_grad) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("zeros: invalid shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.data = std::make_shared<std::vector<double>>(t.numel(), 0.0);
  t.requires_grad = requires_grad;
  if (requires_grad) {
    t.grad = std::make_shared<std::vector<double>>(t.numel(), 0.0);
  }
  return t;
}

Tensor full(int rows, int cols, double value) {
  Tensor t = zeros(rows, cols);
  for (auto& v : *t.data) v = value;
  return t;
}

Tensor from_values(int rows, int cols, std::vector<double> values) {
  if (static_cast<std::size_t>(rows) * cols != values.size()) {
    throw DimensionError("from_values: " + std::to_string(values.size()) + " values for " +
                         std::to_string(rows) + "x" + std::to_string(cols));
  }
  Tensor t = zeros(rows, cols);
  *t.data = std::move(values);
  return t;
}

Tensor from_rows(const std::vector<std::vector<double>>& rows_in) {
  if (rows_in.empty()) throw DimensionError("from_rows: no rows");
  const int cols = static_cast<int>(rows_in[0].size());
  Tensor t = zeros(static_cast<int>(rows_in.size()), cols);
  for (std::size_t r = 0; r < rows_in.size(); ++r) {
    if (static_cast<int>(rows_in[r].size()) != cols) {
      throw DimensionError("from_rows: ragged row " + std::to_string(r));
    }
    for (int c = 0; c < cols; ++c) t.mut(static_cast<int>(r), c) = rows_in[r][c];
  }
  return t;
}

void check_finite(const Tensor& t, const char* where) {
  for (double v : *t.data) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string(where) + ": non-finite value");
    }
  }
}

void backward(const Tensor& loss) {
  if (loss.rows != 1 || loss.cols != 1) {
    throw DimensionError("backward: loss must be 1x1");
  }
  if (!loss.requires_grad) return;  // constant loss, nothing to do
  (*loss.grad)[0] += 1.0;
  if (!loss.node) return;

  // Reverse topological order over the tape, each node visited once.
  std::vector<Tensor> order;
  std::unordered_set<TensorNode*> visited;
  std::vector<std::pair<Tensor, std::size_t>> stack;  // (tensor, next parent index)
  visited.insert(loss.node.get());
  stack.emplace_back(loss, 0);
  while (!stack.empty()) {
    auto& [t, idx] = stack.back();
    if (idx < t.node->parents.size()) {
      Tensor parent = t.node->parents[idx++];
      if (parent.node && !visited.count(parent.node.get())) {
        visited.insert(parent.node.get());
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(t);
      stack.pop_back();
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    it->node->backward(*it);
  }
}

}  // namespace gog
