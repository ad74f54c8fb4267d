#include "finrad/loss.hpp"

#include <algorithm>
#include <cmath>

#include "finrad/errors.hpp"

namespace finrad::neural {

std::string loss_name(LossKind k) {
    switch (k) {
        case LossKind::bce: return "bce";
        case LossKind::cross_entropy: return "cross_entropy";
        case LossKind::mse: return "mse";
        case LossKind::dice_loss: return "dice_loss";
    }
    return "?";
}

LossKind loss_from_name(const std::string& name) {
    if (name == "bce") return LossKind::bce;
    if (name == "cross_entropy") return LossKind::cross_entropy;
    if (name == "mse") return LossKind::mse;
    if (name == "dice_loss") return LossKind::dice_loss;
    throw InvalidArgument("unknown loss kind: " + name);
}

template <typename T>
std::pair<double, Tensor<T>> loss(LossKind kind, const Tensor<T>& pred,
                                  const Tensor<T>& target) {
    if (pred.shape != target.shape)
        throw ShapeError("loss: pred " + shape_str(pred.shape) +
                         " vs target " + shape_str(target.shape));
    const size_t n = pred.numel();
    Tensor<T> grad(pred.shape);
    double total = 0.0;

    switch (kind) {
        case LossKind::mse: {
            for (size_t i = 0; i < n; ++i) {
                const double d = static_cast<double>(pred.data[i]) - target.data[i];
                total += d * d;
                grad.data[i] = static_cast<T>(2.0 * d / static_cast<double>(n));
            }
            total /= static_cast<double>(n);
            break;
        }
        case LossKind::bce: {
            constexpr double kClamp = 1e-7;
            for (size_t i = 0; i < n; ++i) {
                const double p =
                    std::clamp(static_cast<double>(pred.data[i]), kClamp, 1.0 - kClamp);
                const double t = static_cast<double>(target.data[i]);
                total += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
                grad.data[i] = static_cast<T>(
                    (-(t / p) + (1.0 - t) / (1.0 - p)) / static_cast<double>(n));
            }
            total /= static_cast<double>(n);
            break;
        }
        case LossKind::cross_entropy: {
            constexpr double kClamp = 1e-7;
            for (size_t i = 0; i < n; ++i) {
                const double p =
                    std::clamp(static_cast<double>(pred.data[i]), kClamp, 1.0 - kClamp);
                const double t = static_cast<double>(target.data[i]);
                if (t != 0.0) total += -t * std::log(p);
                grad.data[i] = static_cast<T>(t != 0.0 ? -t / p : 0.0);
            }
            break;
        }
        case LossKind::dice_loss: {
            constexpr double kSmooth = 1.0;
            double inter = 0.0, sp = 0.0, st = 0.0;
            for (size_t i = 0; i < n; ++i) {
                inter += static_cast<double>(pred.data[i]) * target.data[i];
                sp += pred.data[i];
                st += target.data[i];
            }
            const double num = 2.0 * inter + kSmooth;
            const double den = sp + st + kSmooth;
            total = 1.0 - num / den;
            for (size_t i = 0; i < n; ++i) {
                const double t = static_cast<double>(target.data[i]);
                grad.data[i] = static_cast<T>(-(2.0 * t * den - num) / (den * den));
            }
            break;
        }
    }
    return {total, std::move(grad)};
}

template std::pair<double, Tensor<float>> loss<float>(LossKind,
                                                      const Tensor<float>&,
                                                      const Tensor<float>&);
template std::pair<double, Tensor<double>> loss<double>(LossKind,
                                                        const Tensor<double>&,
                                                        const Tensor<double>&);

} // namespace finrad::neural
