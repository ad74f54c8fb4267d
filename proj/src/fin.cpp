#include "finrad/fin.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "finrad/errors.hpp"
#include "finrad/model_io.hpp"
#include "finrad/parallel.hpp"
#include "finrad/rng.hpp"
#include "finrad/tensorize.hpp"
#include "finrad/trainer.hpp"

namespace finrad::fin {

namespace {

constexpr int kWidthChoices[4] = {32, 64, 128, 256};

neural::GraphSpec fin_graph(int input_size, const TopologySpec& topo) {
    neural::GraphBuilder b;
    int node = b.input({input_size});
    for (int width : topo.hidden) {
        node = b.dense(node, width);
        node = b.relu(node);
    }
    b.dense(node, 1);
    return std::move(b.spec);
}

void require_uniform_geometry(const std::vector<imaging::GrayImage>& corpus) {
    for (const auto& img : corpus)
        if (img.width != corpus[0].width || img.height != corpus[0].height)
            throw ShapeError("fin: corpus geometry is not uniform");
}

} // namespace

std::vector<TopologySpec> sample_topologies(int k, uint64_t seed) {
    if (k < 1) throw InvalidArgument("sample_topologies: k must be >= 1");
    Pcg64 rng = derive_rng(seed, rng_domain::topology, 0);
    std::vector<TopologySpec> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        TopologySpec t;
        const int layers = 2 + static_cast<int>(rng.below(3));
        for (int l = 0; l < layers; ++l)
            t.hidden.push_back(kWidthChoices[rng.below(4)]);
        out.push_back(std::move(t));
    }
    return out;
}

float FinModel::predict_normalized(const imaging::GrayImage& img) const {
    if (img.width != input_width || img.height != input_height)
        throw ShapeError("FinModel::predict: image geometry mismatch");
    return neural::forward(net, flat_tensor(img)).data[0];
}

double FinModel::predict(const imaging::GrayImage& img) const {
    return static_cast<double>(predict_normalized(img)) * target_std + target_mean;
}

std::pair<FinModel, ImitationReport> train_fin(
    const std::string& feature_id, const std::vector<imaging::GrayImage>& corpus,
    const FinTrainConfig& cfg) {
    const int fidx = radiomics::feature_index(feature_id);
    if (corpus.size() < 100)
        throw InvalidArgument("train_fin: corpus must hold at least 100 images, got " +
                              std::to_string(corpus.size()));
    require_uniform_geometry(corpus);
    if (cfg.topologies < 1) throw InvalidArgument("train_fin: topologies >= 1");

    const int n = static_cast<int>(corpus.size());
    const int width = corpus[0].width;
    const int height = corpus[0].height;
    const int d = width * height;

    // Regression targets from the exact feature implementation.
    std::vector<double> targets(static_cast<size_t>(n));
    parallel_for(n, cfg.workers, [&](int i) {
        targets[static_cast<size_t>(i)] =
            radiomics::extract_features(corpus[static_cast<size_t>(i)], cfg.ng)[fidx];
    });

    // 80/10/10 split by seeded shuffle.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Pcg64 split_rng = derive_rng(cfg.seed, rng_domain::fin_split, 0);
    split_rng.shuffle(order);
    const int n_train = (n * 8) / 10;
    const int n_val = n / 10;
    std::vector<int> train_idx(order.begin(), order.begin() + n_train);
    std::vector<int> val_idx(order.begin() + n_train, order.begin() + n_train + n_val);
    std::vector<int> test_idx(order.begin() + n_train + n_val, order.end());

    double mean = 0.0;
    for (int i : train_idx) mean += targets[static_cast<size_t>(i)];
    mean /= static_cast<double>(train_idx.size());
    double var = 0.0;
    for (int i : train_idx) {
        const double dlt = targets[static_cast<size_t>(i)] - mean;
        var += dlt * dlt;
    }
    var /= static_cast<double>(train_idx.size());
    const double std_dev = std::sqrt(var);
    if (std_dev < 1e-12)
        throw InvalidArgument("train_fin: degenerate target distribution for " +
                              feature_id + " (std < 1e-12)");

    // Flattened inputs and normalized targets, shared across candidates.
    std::vector<neural::Tensor<float>> inputs;
    inputs.reserve(static_cast<size_t>(n));
    for (const auto& img : corpus) inputs.push_back(flat_tensor(img));
    std::vector<float> norm_targets(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        norm_targets[static_cast<size_t>(i)] =
            static_cast<float>((targets[static_cast<size_t>(i)] - mean) / std_dev);

    const std::vector<TopologySpec> candidates =
        sample_topologies(cfg.topologies, cfg.seed);

    struct CandidateResult {
        neural::ModelGraph<float> net;
        double val_mse = 0.0;
        int epochs = 0;
    };
    std::vector<CandidateResult> results(candidates.size());

    parallel_for(static_cast<int>(candidates.size()), cfg.workers, [&](int ci) {
        const uint64_t cand_seed =
            mix_seed(cfg.seed, rng_domain::fin_candidate, static_cast<uint64_t>(ci));
        neural::ModelGraph<float> net = neural::build_network<float>(
            fin_graph(d, candidates[static_cast<size_t>(ci)]), cand_seed);

        harness::TrainConfig tc;
        tc.lr = cfg.lr;
        tc.batch_size = cfg.batch_size;
        tc.max_epochs = cfg.max_epochs;
        tc.patience = cfg.patience;
        tc.delta = cfg.delta;
        tc.seed = cand_seed;
        tc.loss = neural::LossKind::mse;

        harness::TrainData data;
        data.input = [&](int i) { return inputs[static_cast<size_t>(i)]; };
        data.target = [&](int i) {
            neural::Tensor<float> t({1});
            t.data[0] = norm_targets[static_cast<size_t>(i)];
            return t;
        };
        data.train_indices = train_idx;
        data.val_indices = val_idx;

        const harness::TrainHistory hist = harness::train_model(net, data, tc);
        CandidateResult& r = results[static_cast<size_t>(ci)];
        r.val_mse =
            hist.epochs[static_cast<size_t>(hist.convergence_epoch - 1)].val_loss;
        r.epochs = static_cast<int>(hist.epochs.size());
        r.net = std::move(net);
    });

    size_t best = 0;
    for (size_t ci = 1; ci < results.size(); ++ci)
        if (results[ci].val_mse < results[best].val_mse) best = ci;
    for (const auto& r : results)
        if (results[best].val_mse > r.val_mse)
            throw Error("train_fin: retained candidate is not the best (internal)");

    FinModel model;
    model.feature_id = feature_id;
    model.topology = candidates[best];
    model.net = std::move(results[best].net);
    model.target_mean = mean;
    model.target_std = std_dev;
    model.input_width = width;
    model.input_height = height;

    // Held-out report in raw units.
    ImitationReport report;
    report.feature_id = feature_id;
    report.val_mse = results[best].val_mse;
    report.epochs_trained = results[best].epochs;
    report.topology = candidates[best];
    double ss_res = 0.0, ss_tot = 0.0, mae = 0.0, test_mean = 0.0;
    for (int i : test_idx) test_mean += targets[static_cast<size_t>(i)];
    test_mean /= static_cast<double>(test_idx.size());
    for (int i : test_idx) {
        const double y = targets[static_cast<size_t>(i)];
        const double yhat = model.predict(corpus[static_cast<size_t>(i)]);
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - test_mean) * (y - test_mean);
        mae += std::abs(y - yhat);
    }
    report.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot
                             : (ss_res == 0.0 ? 1.0 : 0.0);
    report.mae = mae / static_cast<double>(test_idx.size());
    return {std::move(model), std::move(report)};
}

ImitationReport evaluate_fin(const FinModel& model,
                             const std::vector<imaging::GrayImage>& corpus,
                             int ng) {
    if (corpus.empty()) throw InvalidArgument("evaluate_fin: empty corpus");
    require_uniform_geometry(corpus);
    if (corpus[0].width != model.input_width ||
        corpus[0].height != model.input_height)
        throw ShapeError("evaluate_fin: corpus geometry does not match the FIN");

    const int fidx = radiomics::feature_index(model.feature_id);
    const int n = static_cast<int>(corpus.size());
    double mean = 0.0;
    std::vector<double> targets(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        targets[static_cast<size_t>(i)] =
            radiomics::extract_features(corpus[static_cast<size_t>(i)], ng)[fidx];
        mean += targets[static_cast<size_t>(i)];
    }
    mean /= static_cast<double>(n);

    ImitationReport rep;
    rep.feature_id = model.feature_id;
    rep.topology = model.topology;
    double ss_res = 0.0, ss_tot = 0.0, mae = 0.0, norm_mse = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = targets[static_cast<size_t>(i)];
        const double norm_pred = model.predict_normalized(corpus[static_cast<size_t>(i)]);
        const double yhat = norm_pred * model.target_std + model.target_mean;
        ss_res += (y - yhat) * (y - yhat);
        ss_tot += (y - mean) * (y - mean);
        mae += std::abs(y - yhat);
        const double norm_y = (y - model.target_mean) / model.target_std;
        norm_mse += (norm_y - norm_pred) * (norm_y - norm_pred);
    }
    rep.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    rep.mae = mae / static_cast<double>(n);
    rep.val_mse = norm_mse / static_cast<double>(n);
    rep.epochs_trained = 0;
    return rep;
}

std::array<double, radiomics::FeatureVector::kCount> FinEnsemble::predict(
    const imaging::GrayImage& img) const {
    if (img.width != input_width || img.height != input_height)
        throw ShapeError("FinEnsemble::predict: image geometry mismatch");
    std::array<double, radiomics::FeatureVector::kCount> out{};
    const neural::Tensor<float> x = flat_tensor(img);
    for (size_t i = 0; i < members.size(); ++i)
        out[i] = static_cast<double>(neural::forward(members[i].net, x).data[0]);
    return out;
}

FinEnsemble assemble_ensemble(const std::vector<FinModel>& fins) {
    const auto& names = radiomics::FeatureVector::names();
    std::vector<const FinModel*> ordered(radiomics::FeatureVector::kCount, nullptr);
    for (const auto& f : fins) {
        const int idx = radiomics::feature_index(f.feature_id);
        if (ordered[static_cast<size_t>(idx)])
            throw InvalidArgument("assemble_ensemble: duplicate FIN for feature " +
                                  f.feature_id);
        ordered[static_cast<size_t>(idx)] = &f;
    }
    for (int i = 0; i < radiomics::FeatureVector::kCount; ++i)
        if (!ordered[static_cast<size_t>(i)])
            throw InvalidArgument("assemble_ensemble: missing FIN for feature " +
                                  names[static_cast<size_t>(i)]);

    FinEnsemble ens;
    ens.input_width = ordered[0]->input_width;
    ens.input_height = ordered[0]->input_height;
    for (const FinModel* f : ordered) {
        if (f->input_width != ens.input_width || f->input_height != ens.input_height)
            throw ShapeError("assemble_ensemble: mixed input geometry");
        FinEnsemble::Member m;
        m.feature_id = f->feature_id;
        m.topology = f->topology;
        m.net = f->net;
        // Fold z-score de-normalization into the output layer: the member
        // network then emits raw feature estimates directly.
        const int last = static_cast<int>(m.net.spec.nodes.size()) - 1;
        const int wp = m.net.weight_param[last];
        const float s = static_cast<float>(f->target_std);
        for (auto& v : m.net.params[static_cast<size_t>(wp)].data) v *= s;
        auto& bias = m.net.params[static_cast<size_t>(wp) + 1].data;
        bias[0] = bias[0] * s + static_cast<float>(f->target_mean);
        ens.members.push_back(std::move(m));
    }
    return ens;
}

void save_fin(const FinModel& model, const std::filesystem::path& path) {
    nlohmann::json extra;
    extra["fin"] = {{"feature_id", model.feature_id},
                    {"target_mean", model.target_mean},
                    {"target_std", model.target_std},
                    {"input_width", model.input_width},
                    {"input_height", model.input_height},
                    {"hidden", model.topology.hidden}};
    neural::save_model(model.net, path, extra);
}

FinModel load_fin(const std::filesystem::path& path) {
    neural::LoadedModel loaded = neural::load_model(path);
    if (!loaded.header.contains("fin"))
        throw CorruptFileError("model file has no FIN metadata: " + path.string());
    const nlohmann::json& meta = loaded.header["fin"];
    FinModel model;
    model.net = std::move(loaded.model);
    model.feature_id = meta.at("feature_id").get<std::string>();
    model.target_mean = meta.at("target_mean").get<double>();
    model.target_std = meta.at("target_std").get<double>();
    model.input_width = meta.at("input_width").get<int>();
    model.input_height = meta.at("input_height").get<int>();
    model.topology.hidden = meta.at("hidden").get<std::vector<int>>();
    return model;
}

} // namespace finrad::fin
