#include "gog/grad_check.hpp"

#include <cmath>
#include <map>

#include "gog/error.hpp"

namespace gog {

double check_gradients(const std::function<Tensor(ParamStore&)>& loss_fn, ParamStore& store,
                       double epsilon) {
  store.zero_grads();
  Tensor loss;
  {
    set_grad_enabled(true);
    loss = loss_fn(store);
  }
  if (loss.rows != 1 || loss.cols != 1) throw DimensionError("check_gradients: loss must be scalar");
  if (!std::isfinite(loss.scalar())) throw NumericalError("check_gradients: non-finite loss");
  backward(loss);

  std::map<std::string, std::vector<double>> analytic;
  for (const auto& name : store.names()) {
    if (store.trainable(name)) analytic[name] = *store.get(name).grad;
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (const auto& [name, grads] : analytic) {
    Tensor& param = store.get(name);
    for (std::size_t i = 0; i < param.numel(); ++i) {
      const double saved = (*param.data)[i];
      (*param.data)[i] = saved + epsilon;
      const double up = loss_fn(store).scalar();
      (*param.data)[i] = saved - epsilon;
      const double down = loss_fn(store).scalar();
      (*param.data)[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericalError("check_gradients: non-finite loss while perturbing '" + name + "'");
      }
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = grads[i];
      const double err = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gog
