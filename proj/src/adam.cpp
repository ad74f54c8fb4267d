#include "finrad/adam.hpp"

#include <cmath>

#include "finrad/errors.hpp"
#include "finrad/kernels.hpp"

namespace finrad::neural {

template <typename T>
AdamState<T> AdamState<T>::init(const ModelGraph<T>& model, double lr) {
    AdamState<T> st;
    st.lr = lr;
    st.m.reserve(model.params.size());
    st.v.reserve(model.params.size());
    for (const auto& p : model.params) {
        st.m.emplace_back(p.shape);
        st.v.emplace_back(p.shape);
    }
    return st;
}

template <typename T>
void adam_step(ModelGraph<T>& model, const std::vector<Tensor<T>>& grads,
               AdamState<T>& st) {
    if (grads.size() != model.params.size() || st.m.size() != model.params.size())
        throw ShapeError("adam_step: gradient list does not match parameters");
    for (size_t i = 0; i < grads.size(); ++i)
        if (grads[i].shape != model.params[i].shape)
            throw ShapeError("adam_step: gradient shape mismatch at tensor " +
                             std::to_string(i));

    st.step += 1;
    const double c1 = 1.0 / (1.0 - std::pow(st.beta1, static_cast<double>(st.step)));
    const double c2 = 1.0 / (1.0 - std::pow(st.beta2, static_cast<double>(st.step)));

    for (size_t i = 0; i < grads.size(); ++i) {
        if (!model.trainable[i]) continue;
        kernels::adam_update(model.params[i].ptr(), grads[i].ptr(), st.m[i].ptr(),
                             st.v[i].ptr(), grads[i].numel(), static_cast<T>(st.lr),
                             static_cast<T>(st.beta1), static_cast<T>(st.beta2),
                             static_cast<T>(st.eps), static_cast<T>(c1),
                             static_cast<T>(c2));
    }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(ModelGraph<float>&, const std::vector<Tensor<float>>&,
                               AdamState<float>&);
template void adam_step<double>(ModelGraph<double>&,
                                const std::vector<Tensor<double>>&,
                                AdamState<double>&);

} // namespace finrad::neural
