#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace finrad::neural {

/// Dense row-major tensor. Training runs float instances, gradient checking
/// runs double instances of the same graphs.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s);
    Tensor(std::vector<int> s, std::vector<T> d);

    size_t numel() const { return data.size(); }
    int rank() const { return static_cast<int>(shape.size()); }
    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
};

size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

template <typename U, typename T>
Tensor<U> tensor_cast(const Tensor<T>& t) {
    Tensor<U> out;
    out.shape = t.shape;
    out.data.reserve(t.data.size());
    for (const T v : t.data) out.data.push_back(static_cast<U>(v));
    return out;
}

extern template struct Tensor<float>;
extern template struct Tensor<double>;

} // namespace finrad::neural
