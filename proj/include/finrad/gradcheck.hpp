#pragma once

#include "finrad/loss.hpp"
#include "finrad/net.hpp"

namespace finrad::neural {

struct GradCheckResult {
    double max_rel = 0.0;  // max per-coordinate relative error
    double norm_rel = 0.0; // ||a - cd||_2 / max(||a||_2, ||cd||_2, 1e-12)
    int coordinates = 0;
};

/// Compares analytic gradients against central differences in 64-bit mode
/// over a random sample of parameter coordinates (all of them when the model
/// has no more than sample_size).
///
/// max_rel uses |analytic - cd| / max(|analytic|, |cd|, 1e-12) per
/// coordinate. For deep composites, coordinates whose true gradient sits
/// below the f64 central-difference noise floor (~1e-15 absolute on the loss
/// difference) dominate max_rel even when every gradient is correct; the
/// aggregate norm_rel is the meaningful correctness gate there.
GradCheckResult grad_check_detail(const ModelGraph<double>& model,
                                  const Tensor<double>& x,
                                  const Tensor<double>& target, LossKind kind,
                                  double h = 1e-5, int sample_size = 200,
                                  uint64_t seed = 17);

/// max_rel of grad_check_detail.
double grad_check(const ModelGraph<double>& model, const Tensor<double>& x,
                  const Tensor<double>& target, LossKind kind, double h = 1e-5,
                  int sample_size = 200, uint64_t seed = 17);

} // namespace finrad::neural
