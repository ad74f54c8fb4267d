#include "finrad/tensor.hpp"

#include "finrad/errors.hpp"

namespace finrad::neural {

size_t shape_numel(const std::vector<int>& shape) {
    size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw InvalidArgument("tensor shape entries must be >= 1");
        n *= static_cast<size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(shape_numel(shape), T(0));
}

template <typename T>
Tensor<T>::Tensor(std::vector<int> s, std::vector<T> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape))
        throw InvalidArgument("tensor data length does not match shape " +
                              shape_str(shape));
}

template struct Tensor<float>;
template struct Tensor<double>;

} // namespace finrad::neural
