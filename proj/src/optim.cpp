#include "emodub/optim.h"

#include <cmath>

namespace emodub {

void adam_step(const ParameterList& params, AdamState& state) {
  ++state.step;
  const AdamConfig& c = state.config;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (Parameter* p : params) {
    auto [it, fresh] = state.moments.try_emplace(p);
    AdamState::Moments& mom = it->second;
    if (fresh) {
      mom.first = Matrix(p->value.rows(), p->value.cols());
      mom.second = Matrix(p->value.rows(), p->value.cols());
    }
    auto value = p->value.data();
    auto grad = p->grad.data();
    auto m = mom.first.data();
    auto v = mom.second.data();
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
    p->zero_grad();
  }
}

void zero_grads(const ParameterList& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace emodub
