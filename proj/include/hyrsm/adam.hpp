#pragma once

#include <cmath>

#include "hyrsm/tensor.hpp"

namespace hyrsm {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment buffers for one parameter matrix.
struct AdamState {
  Tensor m, v;
};

// One bias-corrected update; `t` is the 1-based step shared by all matrices.
inline void adam_update(Tensor& param, const Tensor& grad, AdamState& st, std::size_t t,
                        const AdamHyper& h) {
  require_same_shape(param, grad, "adam_update");
  if (st.m.size() == 0) {
    st.m = Tensor::zeros(param.shape);
    st.v = Tensor::zeros(param.shape);
  }
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.values[i];
    st.m.values[i] = h.beta1 * st.m.values[i] + (1.0 - h.beta1) * g;
    st.v.values[i] = h.beta2 * st.v.values[i] + (1.0 - h.beta2) * g * g;
    const double m_hat = st.m.values[i] / c1;
    const double v_hat = st.v.values[i] / c2;
    param.values[i] -= h.lr * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

}  // namespace hyrsm
