#pragma once

#include <string>

#include "gog/param_store.hpp"
#include "gog/tensor.hpp"

namespace gog {

struct LstmState {
  Tensor hidden;  // 1 x d
  Tensor cell;    // 1 x d
};

struct LstmResult {
  Tensor per_step;  // L x d; rows past valid_len are zero
  LstmState last;   // state after the last valid step
};

/// Registers W (d_in x 4d), U (d x 4d) and b (1 x 4d) under `name`.
void register_lstm_params(ParamStore& store, const std::string& name, int d_in, int d);

/// One gated recurrence step. Gate layout along the 4d axis: input, forget,
/// cell candidate, output.
LstmState lstm_step(const Tensor& x, const LstmState& prev, const std::string& name, ParamStore& store);

/// Left-to-right encoder over `embeddings` (L x d_in). Steps at or beyond
/// valid_len neither update the reported last state nor emit nonzero rows.
/// valid_len < 0 means the full length. If `init` is given it seeds step 0.
LstmResult lstm_encode(const Tensor& embeddings, ParamStore& store, const std::string& name,
                       int valid_len = -1, const LstmState* init = nullptr);

}  // namespace gog
