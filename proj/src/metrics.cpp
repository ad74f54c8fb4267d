#include "finrad/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "finrad/errors.hpp"

namespace finrad::harness {

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw InvalidArgument("auroc: scores and labels must have equal length");
    long long n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) ++n_pos;
        else if (l == 0) ++n_neg;
        else throw InvalidArgument("auroc: labels must be 0 or 1");
    }
    if (n_pos == 0 || n_neg == 0)
        throw InvalidArgument("auroc: both classes must be present");

    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });

    // Tied ranks are averaged; sums of half-integer ranks are exact in
    // double, so this equals pair counting bit-for-bit.
    double pos_rank_sum = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (size_t t = i; t <= j; ++t)
            if (labels[order[t]] == 1) pos_rank_sum += rank;
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos);
    const double nn = static_cast<double>(n_neg);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::pair<double, double> f1_accuracy(const std::vector<int>& preds,
                                      const std::vector<int>& truth,
                                      int classes) {
    if (preds.size() != truth.size())
        throw InvalidArgument("f1_accuracy: length mismatch");
    if (preds.empty()) throw InvalidArgument("f1_accuracy: empty input");
    if (classes < 2) throw InvalidArgument("f1_accuracy: need >= 2 classes");

    std::vector<long long> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    long long correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        const int p = preds[i];
        const int t = truth[i];
        if (p < 0 || p >= classes || t < 0 || t >= classes)
            throw InvalidArgument("f1_accuracy: label out of range");
        if (p == t) {
            ++tp[p];
            ++correct;
        } else {
            ++fp[p];
            ++fn[t];
        }
    }

    double f1_sum = 0.0;
    for (int c = 0; c < classes; ++c) {
        const double denom_p = static_cast<double>(tp[c] + fp[c]);
        const double denom_r = static_cast<double>(tp[c] + fn[c]);
        const double precision = denom_p > 0 ? tp[c] / denom_p : 0.0;
        const double recall = denom_r > 0 ? tp[c] / denom_r : 0.0;
        f1_sum += (precision + recall) > 0.0
                      ? 2.0 * precision * recall / (precision + recall)
                      : 0.0;
    }
    return {f1_sum / classes,
            static_cast<double>(correct) / static_cast<double>(preds.size())};
}

std::pair<double, double> iou_dice(const imaging::GrayImage& pred,
                                   const imaging::GrayImage& truth) {
    if (pred.width != truth.width || pred.height != truth.height)
        throw ShapeError("iou_dice: mask geometry mismatch");
    long long inter = 0, p_count = 0, t_count = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] >= 0.5;
        const bool t = truth.data[i] >= 0.5;
        inter += (p && t);
        p_count += p;
        t_count += t;
    }
    const long long uni = p_count + t_count - inter;
    const double iou = uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
    const double dice = (p_count + t_count) == 0
                            ? 1.0
                            : 2.0 * inter / static_cast<double>(p_count + t_count);
    return {iou, dice};
}

} // namespace finrad::harness
