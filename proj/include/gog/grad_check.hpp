#pragma once

#include <functional>

#include "gog/param_store.hpp"
#include "gog/tensor.hpp"

namespace gog {

/// Compares the backward pass of `loss_fn` against central finite differences
/// for every trainable scalar in the store. Returns the worst relative error
/// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double check_gradients(const std::function<Tensor(ParamStore&)>& loss_fn, ParamStore& store,
                       double epsilon = 1e-5);

}  // namespace gog
