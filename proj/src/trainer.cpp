#include "finrad/trainer.hpp"

#include <cmath>

#include "finrad/errors.hpp"
#include "finrad/rng.hpp"

namespace finrad::harness {

void validate(const TrainConfig& cfg) {
    if (cfg.max_epochs < 1) throw InvalidArgument("TrainConfig: max_epochs >= 1");
    if (cfg.patience < 1) throw InvalidArgument("TrainConfig: patience >= 1");
    if (!(cfg.delta > 0.0)) throw InvalidArgument("TrainConfig: delta > 0");
    if (cfg.batch_size < 1) throw InvalidArgument("TrainConfig: batch_size >= 1");
    if (!(cfg.lr > 0.0)) throw InvalidArgument("TrainConfig: lr > 0");
}

EarlyStopper::Observation EarlyStopper::observe(double val_loss, int epoch) {
    if (best - val_loss >= delta) {
        best = val_loss;
        best_epoch = epoch;
        bad_epochs = 0;
        return {true, false};
    }
    ++bad_epochs;
    return {false, bad_epochs >= patience};
}

namespace {

bool uses_batch_path(const neural::ModelGraph<float>& m) {
    if (m.input_shape().size() != 1) return false;
    for (const auto& n : m.spec.nodes) {
        switch (n.kind) {
            case neural::LayerKind::input:
            case neural::LayerKind::dense:
            case neural::LayerKind::relu:
            case neural::LayerKind::sigmoid:
            case neural::LayerKind::softmax:
            case neural::LayerKind::concat:
                break;
            default:
                return false;
        }
    }
    return true;
}

// Stacks per-sample tensors into one [batch, width] matrix.
neural::Tensor<float> stack_rows(const std::function<neural::Tensor<float>(int)>& fn,
                                 const std::vector<int>& indices) {
    neural::Tensor<float> first = fn(indices[0]);
    const int width = static_cast<int>(first.numel());
    neural::Tensor<float> out({static_cast<int>(indices.size()), width});
    std::copy(first.data.begin(), first.data.end(), out.data.begin());
    for (size_t r = 1; r < indices.size(); ++r) {
        const neural::Tensor<float> t = fn(indices[r]);
        std::copy(t.data.begin(), t.data.end(),
                  out.data.begin() + static_cast<size_t>(r) * width);
    }
    return out;
}

} // namespace

TrainHistory train_model(neural::ModelGraph<float>& model, const TrainData& data,
                         const TrainConfig& cfg, std::ostream* progress,
                         int progress_k) {
    validate(cfg);
    if (data.train_indices.empty() || data.val_indices.empty())
        throw InvalidArgument("train_model: train and validation splits must be "
                              "non-empty");

    const bool batched = uses_batch_path(model);
    neural::AdamState<float> adam = neural::AdamState<float>::init(model, cfg.lr);
    EarlyStopper stopper(cfg.patience, cfg.delta);
    TrainHistory history;
    std::vector<neural::Tensor<float>> best_params = model.params;

    auto eval_split = [&](const std::vector<int>& indices, bool with_metrics,
                          EpochRecord& rec) {
        double total = 0.0;
        double ma = 0.0, mb = 0.0;
        if (batched) {
            const neural::Tensor<float> x = stack_rows(data.input, indices);
            const neural::Tensor<float> t = stack_rows(data.target, indices);
            const auto [l, g] = neural::loss(cfg.loss, forward_batch(model, x), t);
            (void)g;
            total = l * (cfg.loss == neural::LossKind::cross_entropy
                             ? 1.0 / static_cast<double>(indices.size())
                             : 1.0);
            if (with_metrics && data.val_metrics) {
                // Metrics need per-sample predictions; fall through per-sample.
                for (int idx : indices) {
                    const neural::Tensor<float> pred = forward(model, data.input(idx));
                    const auto [a, b] = data.val_metrics(pred, idx);
                    ma += a;
                    mb += b;
                }
            }
        } else {
            for (int idx : indices) {
                const neural::Tensor<float> pred = forward(model, data.input(idx));
                const auto [l, g] = neural::loss(cfg.loss, pred, data.target(idx));
                (void)g;
                total += l;
                if (with_metrics && data.val_metrics) {
                    const auto [a, b] = data.val_metrics(pred, idx);
                    ma += a;
                    mb += b;
                }
            }
            total /= static_cast<double>(indices.size());
        }
        rec.val_loss = total;
        if (with_metrics && data.val_metrics) {
            rec.val_metric_a = ma / static_cast<double>(indices.size());
            rec.val_metric_b = mb / static_cast<double>(indices.size());
            rec.has_metrics = true;
        }
    };

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<int> order = data.train_indices;
        Pcg64 shuffle_rng = derive_rng(cfg.seed, rng_domain::epoch_shuffle,
                                       static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);

        double train_loss_sum = 0.0;
        double train_ma_sum = 0.0, train_mb_sum = 0.0;
        size_t batch_start = 0;
        while (batch_start < order.size()) {
            const size_t batch_end =
                std::min(order.size(), batch_start + static_cast<size_t>(cfg.batch_size));
            const std::vector<int> batch(order.begin() + batch_start,
                                         order.begin() + batch_end);
            const double bsize = static_cast<double>(batch.size());

            std::vector<neural::Tensor<float>> grads;
            if (batched) {
                const neural::Tensor<float> x = stack_rows(data.input, batch);
                const neural::Tensor<float> t = stack_rows(data.target, batch);
                neural::ForwardCache<float> cache;
                const neural::Tensor<float> pred = forward_batch(model, x, &cache);
                auto [l, g] = neural::loss(cfg.loss, pred, t);
                const double scale = cfg.loss == neural::LossKind::cross_entropy
                                         ? 1.0 / bsize
                                         : 1.0;
                for (auto& v : g.data) v = static_cast<float>(v * scale);
                train_loss_sum += l * scale * bsize;
                grads = backward(model, cache, g);
            } else {
                for (size_t bi = 0; bi < batch.size(); ++bi) {
                    neural::ForwardCache<float> cache;
                    const neural::Tensor<float> pred =
                        forward(model, data.input(batch[bi]), &cache);
                    auto [l, g] = neural::loss(cfg.loss, pred, data.target(batch[bi]));
                    train_loss_sum += l;
                    if (data.val_metrics) {
                        const auto [a, mb] = data.val_metrics(pred, batch[bi]);
                        train_ma_sum += a;
                        train_mb_sum += mb;
                    }
                    for (auto& v : g.data) v = static_cast<float>(v / bsize);
                    std::vector<neural::Tensor<float>> sample_grads =
                        backward(model, cache, g);
                    if (grads.empty()) {
                        grads = std::move(sample_grads);
                    } else {
                        for (size_t gi = 0; gi < grads.size(); ++gi)
                            for (size_t j = 0; j < grads[gi].data.size(); ++j)
                                grads[gi].data[j] += sample_grads[gi].data[j];
                    }
                }
            }
            adam_step(model, grads, adam);
            batch_start = batch_end;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss_sum / static_cast<double>(order.size());
        if (data.val_metrics) {
            rec.train_metric_a = train_ma_sum / static_cast<double>(order.size());
            rec.train_metric_b = train_mb_sum / static_cast<double>(order.size());
        }
        eval_split(data.val_indices, true, rec);
        history.epochs.push_back(rec);

        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss))
            throw Error("train_model: loss diverged (non-finite) at epoch " +
                        std::to_string(epoch));
        if (progress)
            (*progress) << epoch << "," << progress_k << "," << rec.train_loss
                        << "," << rec.val_loss << "\n";

        const auto obs = stopper.observe(rec.val_loss, epoch);
        if (obs.improved) best_params = model.params;
        if (obs.stop) break;
    }

    model.params = std::move(best_params);
    history.convergence_epoch = stopper.best_epoch;
    return history;
}

} // namespace finrad::harness
