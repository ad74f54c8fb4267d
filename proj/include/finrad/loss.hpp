#pragma once

#include <string>
#include <utility>

#include "finrad/tensor.hpp"

namespace finrad::neural {

enum class LossKind { bce, cross_entropy, mse, dice_loss };

std::string loss_name(LossKind k);
LossKind loss_from_name(const std::string& name);

/// Scalar loss and its gradient with respect to pred.
///
///   mse           mean squared error over all elements
///   bce           mean binary cross-entropy; pred clamped to [1e-7, 1-1e-7]
///   cross_entropy -sum t_i * log(p_i) against a one-hot target
///   dice_loss     1 - (2*sum(p*t) + 1) / (sum(p) + sum(t) + 1)
template <typename T>
std::pair<double, Tensor<T>> loss(LossKind kind, const Tensor<T>& pred,
                                  const Tensor<T>& target);

} // namespace finrad::neural
