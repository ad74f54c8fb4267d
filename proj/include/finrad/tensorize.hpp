#pragma once

#include "finrad/image.hpp"
#include "finrad/tensor.hpp"

namespace finrad {

/// Flattened [w*h] float view of a grayscale image.
inline neural::Tensor<float> flat_tensor(const imaging::GrayImage& img) {
    neural::Tensor<float> t({static_cast<int>(img.pixel_count())});
    for (size_t i = 0; i < img.data.size(); ++i)
        t.data[i] = static_cast<float>(img.data[i]);
    return t;
}

/// [channels, h, w] float tensor; channels > 1 replicates the gray plane.
inline neural::Tensor<float> chw_tensor(const imaging::GrayImage& img,
                                        int channels = 1) {
    neural::Tensor<float> t({channels, img.height, img.width});
    const size_t plane = img.pixel_count();
    for (size_t i = 0; i < plane; ++i)
        t.data[i] = static_cast<float>(img.data[i]);
    for (int c = 1; c < channels; ++c)
        std::copy(t.data.begin(), t.data.begin() + plane,
                  t.data.begin() + static_cast<size_t>(c) * plane);
    return t;
}

} // namespace finrad
