#pragma once

#include "finrad/net.hpp"

namespace finrad::neural {

/// Adam(0.9, 0.999, 1e-8) with bias correction. Moment accumulators mirror
/// the model's parameter tensors; frozen parameters are skipped.
template <typename T>
struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;

    static AdamState init(const ModelGraph<T>& model, double lr);
};

template <typename T>
void adam_step(ModelGraph<T>& model, const std::vector<Tensor<T>>& grads,
               AdamState<T>& st);

extern template struct AdamState<float>;
extern template struct AdamState<double>;

} // namespace finrad::neural
