#include "gog/lstm.hpp"

#include "gog/error.hpp"
#include "gog/ops.hpp"

namespace gog {

void register_lstm_params(ParamStore& store, const std::string& name, int d_in, int d) {
  store.create(name + ".W", d_in, 4 * d);
  store.create(name + ".U", d, 4 * d);
  store.create(name + ".b", 1, 4 * d, Init::Zeros);
}

LstmState lstm_step(const Tensor& x, const LstmState& prev, const std::string& name, ParamStore& store) {
  const int d = prev.hidden.cols;
  if (prev.cell.cols != d) throw DimensionError("lstm_step: hidden/cell width mismatch");
  Tensor z = add(linear(x, name + ".W", name + ".b", store), matmul(prev.hidden, store.get(name + ".U")));
  Tensor i = sigmoid(slice_cols(z, 0, d));
  Tensor f = sigmoid(slice_cols(z, d, 2 * d));
  Tensor g = tanh_op(slice_cols(z, 2 * d, 3 * d));
  Tensor o = sigmoid(slice_cols(z, 3 * d, 4 * d));
  Tensor c = add(mul(f, prev.cell), mul(i, g));
  Tensor h = mul(o, tanh_op(c));
  return {h, c};
}

LstmResult lstm_encode(const Tensor& embeddings, ParamStore& store, const std::string& name,
                       int valid_len, const LstmState* init) {
  const Tensor& w = store.get(name + ".W");
  if (embeddings.cols != w.rows) {
    throw DimensionError("lstm_encode: embedding width " + std::to_string(embeddings.cols) +
                         " against '" + name + ".W' of " + std::to_string(w.rows) + " inputs");
  }
  const int L = embeddings.rows;
  const int d = w.cols / 4;
  if (valid_len < 0 || valid_len > L) valid_len = L;
  if (valid_len < 1) throw ValidationError("lstm_encode: sequence has no valid steps");

  LstmState state;
  if (init != nullptr) {
    state = *init;
  } else {
    state = {zeros(1, d), zeros(1, d)};
  }
  std::vector<Tensor> steps;
  steps.reserve(L);
  for (int t = 0; t < valid_len; ++t) {
    state = lstm_step(row(embeddings, t), state, name, store);
    steps.push_back(state.hidden);
  }
  for (int t = valid_len; t < L; ++t) steps.push_back(zeros(1, d));
  return {concat_rows(steps), state};
}

}  // namespace gog
