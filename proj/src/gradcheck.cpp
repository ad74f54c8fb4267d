#include "finrad/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "finrad/rng.hpp"

namespace finrad::neural {

GradCheckResult grad_check_detail(const ModelGraph<double>& model,
                                  const Tensor<double>& x,
                                  const Tensor<double>& target, LossKind kind,
                                  double h, int sample_size, uint64_t seed) {
    ForwardCache<double> cache;
    const Tensor<double> pred = forward(model, x, &cache);
    const auto [loss_value, loss_grad] = loss(kind, pred, target);
    (void)loss_value;
    const std::vector<Tensor<double>> analytic = backward(model, cache, loss_grad);

    size_t total = 0;
    for (const auto& p : model.params) total += p.numel();

    // Sample distinct flat coordinates (all of them when the model is small).
    std::vector<size_t> coords;
    if (total <= static_cast<size_t>(sample_size)) {
        coords.resize(total);
        for (size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
        Pcg64 rng = derive_rng(seed, rng_domain::grad_check, 0);
        coords.resize(total);
        for (size_t i = 0; i < total; ++i) coords[i] = i;
        rng.shuffle(coords);
        coords.resize(static_cast<size_t>(sample_size));
    }

    ModelGraph<double> probe = model;
    auto locate = [&](size_t flat) -> std::pair<size_t, size_t> {
        size_t t = 0;
        while (flat >= probe.params[t].numel()) {
            flat -= probe.params[t].numel();
            ++t;
        }
        return {t, flat};
    };

    GradCheckResult result;
    result.coordinates = static_cast<int>(coords.size());
    double diff_sq = 0.0, a_sq = 0.0, cd_sq = 0.0;
    for (size_t flat : coords) {
        const auto [t, off] = locate(flat);
        const double saved = probe.params[t].data[off];

        probe.params[t].data[off] = saved + h;
        const double lp = loss(kind, forward(probe, x), target).first;
        probe.params[t].data[off] = saved - h;
        const double lm = loss(kind, forward(probe, x), target).first;
        probe.params[t].data[off] = saved;

        const double cd = (lp - lm) / (2.0 * h);
        const double a = analytic[t].data[off];
        const double rel =
            std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-12});
        result.max_rel = std::max(result.max_rel, rel);
        diff_sq += (a - cd) * (a - cd);
        a_sq += a * a;
        cd_sq += cd * cd;
    }
    result.norm_rel = std::sqrt(diff_sq) /
                      std::max({std::sqrt(a_sq), std::sqrt(cd_sq), 1e-12});
    return result;
}

double grad_check(const ModelGraph<double>& model, const Tensor<double>& x,
                  const Tensor<double>& target, LossKind kind, double h,
                  int sample_size, uint64_t seed) {
    return grad_check_detail(model, x, target, kind, h, sample_size, seed).max_rel;
}

} // namespace finrad::neural
