#pragma once

#include <utility>
#include <vector>

#include "finrad/image.hpp"

namespace finrad::harness {

/// Mann-Whitney AUROC: the fraction of (positive, negative) pairs where the
/// positive outscores the negative, ties counted 0.5. Computed via tied-rank
/// sums, which matches brute-force pair counting exactly. Both classes must
/// be present.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Macro-averaged F1 (per-class F1 = 2PR/(P+R), 0 when P+R = 0) and exact
/// match accuracy.
std::pair<double, double> f1_accuracy(const std::vector<int>& preds,
                                      const std::vector<int>& truth,
                                      int classes);

/// Intersection-over-union and Dice for binary masks (values thresholded at
/// 0.5). Both return 1.0 when both masks are empty.
std::pair<double, double> iou_dice(const imaging::GrayImage& pred,
                                   const imaging::GrayImage& truth);

} // namespace finrad::harness
