#include "pmrnet/optimizer.hpp"

#include <cmath>

namespace pmrnet {

template <typename T>
Adam<T>::Adam(const ParameterSet<T>& params, AdamSettings settings)
    : settings_(settings) {
  for (const auto& e : params.parameters()) {
    params_.push_back(e.var);
    m_.emplace_back(e.var->shape());
    v_.emplace_back(e.var->shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++steps_;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  const double lr = settings_.learning_rate;
  const double wd = settings_.weight_decay;
  const double eps = settings_.eps;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Node<T>& p = *params_[k];
    if (p.grad.shape() != p.value.shape()) continue;
    T* theta = p.value.data();
    const T* g = p.grad.data();
    T* m = m_[k].data();
    T* v = v_[k].data();
    const std::size_t n = p.value.size();
#pragma omp parallel for simd schedule(static) if (n > 65536)
    for (std::size_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]) + wd * theta[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / c1;
      const double vhat = vi / c2;
      theta[i] = static_cast<T>(theta[i] - lr * mhat / (std::sqrt(vhat) + eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace pmrnet
