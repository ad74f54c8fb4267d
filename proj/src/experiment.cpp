#include "finrad/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "finrad/errors.hpp"
#include "finrad/metrics.hpp"
#include "finrad/parallel.hpp"
#include "finrad/rng.hpp"
#include "finrad/tensorize.hpp"

namespace finrad::harness {

namespace {

// Sub-stream tags under rng_domain::experiment.
constexpr uint64_t kTagPretrainCorpus = 128;
constexpr uint64_t kTagPatchShuffle = 129;
constexpr uint64_t kTagFinSeedBase = 256;
constexpr uint64_t kTagBuildBase = 4096;
constexpr uint64_t kTagTrainBase = 65536;

std::string fmt_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

neural::Tensor<float> one_hot(int label, int classes) {
    neural::Tensor<float> t({classes});
    t.data[static_cast<size_t>(label)] = 1.0f;
    return t;
}

fin::FinEnsemble pretrain_ensemble(const std::vector<imaging::GrayImage>& corpus,
                                   const ExperimentSpec& spec,
                                   std::ostream* progress) {
    std::vector<fin::FinModel> fins(radiomics::FeatureVector::kCount);
    const auto& names = radiomics::FeatureVector::names();
    parallel_for(radiomics::FeatureVector::kCount, spec.workers, [&](int i) {
        fin::FinTrainConfig cfg = spec.fin_pretrain;
        cfg.seed = mix_seed(spec.seed, rng_domain::experiment,
                            kTagFinSeedBase + static_cast<uint64_t>(i));
        cfg.workers = 1; // parallelism lives at the feature level here
        auto [model, report] = fin::train_fin(names[static_cast<size_t>(i)], corpus, cfg);
        fins[static_cast<size_t>(i)] = std::move(model);
        if (progress)
            (*progress) << "# fin " << report.feature_id << " r2=" << report.r2
                        << " epochs=" << report.epochs_trained << "\n";
    });
    return fin::assemble_ensemble(fins);
}

// Shared classification unit: builds, trains, and evaluates one model on one
// split. `input_of` supplies tensorized inputs.
RunRecord run_classifier_unit(
    const std::string& model_name, neural::ModelGraph<float> model,
    const std::function<neural::Tensor<float>(int)>& input_of,
    const Dataset& data, const std::vector<int>& train_idx,
    const std::vector<int>& val_idx, const std::vector<int>& test_idx,
    const TrainConfig& tc, int run, const std::vector<std::string>& metric_names,
    std::ostream* progress) {
    TrainData td;
    td.input = input_of;
    td.target = [&](int i) { return one_hot(data.labels[static_cast<size_t>(i)], data.classes); };
    td.train_indices = train_idx;
    td.val_indices = val_idx;

    const TrainHistory hist = train_model(model, td, tc, progress, run);

    RunRecord rec;
    rec.model = model_name;
    rec.run = run;
    rec.convergence_epoch = hist.convergence_epoch;
    rec.curve = hist.epochs;

    if (metric_names[0] == "auroc") {
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i : test_idx) {
            const neural::Tensor<float> p = forward(model, input_of(i));
            scores.push_back(static_cast<double>(p.data[1]));
            labels.push_back(data.labels[static_cast<size_t>(i)]);
        }
        rec.metric_a = auroc(scores, labels);
        rec.metric_b = 0.0;
    } else {
        std::vector<int> preds, truth;
        for (int i : test_idx) {
            const neural::Tensor<float> p = forward(model, input_of(i));
            preds.push_back(static_cast<int>(
                std::max_element(p.data.begin(), p.data.end()) - p.data.begin()));
            truth.push_back(data.labels[static_cast<size_t>(i)]);
        }
        const auto [f1, acc] = f1_accuracy(preds, truth, data.classes);
        rec.metric_a = f1;
        rec.metric_b = acc;
    }
    return rec;
}

struct FeatureStats {
    std::array<double, radiomics::FeatureVector::kCount> mean{};
    std::array<double, radiomics::FeatureVector::kCount> std_dev{};
};

FeatureStats feature_stats(const std::vector<radiomics::FeatureVector>& feats,
                           const std::vector<int>& indices) {
    FeatureStats st;
    for (int i : indices) {
        const auto v = feats[static_cast<size_t>(i)].values();
        for (int f = 0; f < radiomics::FeatureVector::kCount; ++f)
            st.mean[static_cast<size_t>(f)] += v[static_cast<size_t>(f)];
    }
    for (auto& m : st.mean) m /= static_cast<double>(indices.size());
    for (int i : indices) {
        const auto v = feats[static_cast<size_t>(i)].values();
        for (int f = 0; f < radiomics::FeatureVector::kCount; ++f) {
            const double d = v[static_cast<size_t>(f)] - st.mean[static_cast<size_t>(f)];
            st.std_dev[static_cast<size_t>(f)] += d * d;
        }
    }
    for (auto& s : st.std_dev) {
        s = std::sqrt(s / static_cast<double>(indices.size()));
        if (s < 1e-12) s = 1.0;
    }
    return st;
}

ExperimentReport run_exp1(const ExperimentSpec& spec, std::ostream* progress) {
    ExperimentReport report;
    report.task = spec.task;
    report.metric_names = {"auroc"};
    report.model_names = {"feature_dfnn", "cnn", "fin_cnn"};

    Dataset data = gen_texture_dataset(spec.n, 2, spec.seed, spec.imbalance);

    Dataset pre = gen_texture_dataset(
        std::max(spec.fin_corpus_n, 100), 2,
        mix_seed(spec.seed, rng_domain::experiment, kTagPretrainCorpus),
        spec.imbalance);
    const fin::FinEnsemble ens = pretrain_ensemble(pre.images, spec, progress);

    std::vector<radiomics::FeatureVector> feats(data.size());
    parallel_for(static_cast<int>(data.size()), spec.workers, [&](int i) {
        feats[static_cast<size_t>(i)] =
            radiomics::extract_features(data.images[static_cast<size_t>(i)],
                                        spec.fin_pretrain.ng);
    });

    // Parameter parity: widen both baselines up to the FIN model's count.
    models::ClassifierConfig fin_cfg = spec.classifier;
    fin_cfg.num_classes = 2;
    fin_cfg.fin_mode = models::FinMode::embedded_finetune;
    const size_t target = models::count_fin_cnn_parameters(fin_cfg, ens);
    models::ClassifierConfig cnn_cfg = spec.classifier;
    cnn_cfg.num_classes = 2;
    cnn_cfg.fin_mode = models::FinMode::none;
    cnn_cfg.head = models::widen_head_for_parity(cnn_cfg, target);
    const std::vector<int> dfnn_widths = models::dfnn_widths_for_parity(2, target);

    {
        const auto dfnn = models::build_feature_dfnn(dfnn_widths, 2, 1);
        const auto cnn = models::build_cnn_classifier(cnn_cfg, 1);
        const auto fincnn = models::build_fin_cnn_classifier(fin_cfg, ens, 1);
        report.parity = models::parameter_parity({{"feature_dfnn", &dfnn},
                                                  {"cnn", &cnn},
                                                  {"fin_cnn", &fincnn.graph}});
        if (report.parity.spread > 0.05)
            throw Error("exp1: parameter parity exceeded 5% (" +
                        std::to_string(report.parity.spread) + ")");
    }

    const FoldSplit split = kfold_split(data, spec.folds, spec.seed);
    std::vector<FeatureStats> fold_stats(static_cast<size_t>(spec.folds));
    std::vector<FoldIndices> fold_idx(static_cast<size_t>(spec.folds));
    for (int f = 0; f < spec.folds; ++f) {
        fold_idx[static_cast<size_t>(f)] = fold_indices(split, f);
        fold_stats[static_cast<size_t>(f)] =
            feature_stats(feats, fold_idx[static_cast<size_t>(f)].train);
    }

    const int n_units = spec.folds * 3;
    std::vector<RunRecord> records(static_cast<size_t>(n_units));
    parallel_for(n_units, spec.workers, [&](int unit) {
        const int f = unit / 3;
        const int midx = unit % 3;
        const FoldIndices& fi = fold_idx[static_cast<size_t>(f)];
        const FeatureStats& st = fold_stats[static_cast<size_t>(f)];
        const uint64_t build_seed =
            mix_seed(spec.seed, rng_domain::experiment,
                     kTagBuildBase + static_cast<uint64_t>(unit));
        TrainConfig tc = spec.train;
        tc.seed = mix_seed(spec.seed, rng_domain::experiment,
                           kTagTrainBase + static_cast<uint64_t>(unit));
        tc.loss = neural::LossKind::cross_entropy;

        std::function<neural::Tensor<float>(int)> input_of;
        neural::ModelGraph<float> model;
        std::string name = report.model_names[static_cast<size_t>(midx)];
        if (midx == 0) {
            model = models::build_feature_dfnn(dfnn_widths, 2, build_seed);
            input_of = [&feats, &st](int i) {
                neural::Tensor<float> t({radiomics::FeatureVector::kCount});
                const auto v = feats[static_cast<size_t>(i)].values();
                for (int k = 0; k < radiomics::FeatureVector::kCount; ++k)
                    t.data[static_cast<size_t>(k)] = static_cast<float>(
                        (v[static_cast<size_t>(k)] - st.mean[static_cast<size_t>(k)]) /
                        st.std_dev[static_cast<size_t>(k)]);
                return t;
            };
        } else if (midx == 1) {
            model = models::build_cnn_classifier(cnn_cfg, build_seed);
            input_of = [&data](int i) {
                return chw_tensor(data.images[static_cast<size_t>(i)]);
            };
        } else {
            model = models::build_fin_cnn_classifier(fin_cfg, ens, build_seed).graph;
            input_of = [&data](int i) {
                return chw_tensor(data.images[static_cast<size_t>(i)]);
            };
        }
        records[static_cast<size_t>(unit)] =
            run_classifier_unit(name, std::move(model), input_of, data, fi.train,
                                fi.val, fi.test, tc, f, report.metric_names,
                                progress);
    });
    report.records = std::move(records);
    return report;
}

ExperimentReport run_exp2(const ExperimentSpec& spec, std::ostream* progress) {
    ExperimentReport report;
    report.task = spec.task;
    report.metric_names = {"f1", "accuracy"};
    report.model_names = {"cnn_rgb", "cnn_gray", "fin_cnn"};

    const int classes = std::max(spec.classes, 2);
    Dataset data = gen_texture_dataset(spec.n, classes, spec.seed);

    Dataset pre = gen_texture_dataset(
        std::max(spec.fin_corpus_n, 100), classes,
        mix_seed(spec.seed, rng_domain::experiment, kTagPretrainCorpus));
    const fin::FinEnsemble ens = pretrain_ensemble(pre.images, spec, progress);

    models::ClassifierConfig fin_cfg = spec.classifier;
    fin_cfg.num_classes = classes;
    fin_cfg.fin_mode = models::FinMode::embedded_finetune;
    const size_t target = models::count_fin_cnn_parameters(fin_cfg, ens);

    models::ClassifierConfig gray_cfg = spec.classifier;
    gray_cfg.num_classes = classes;
    gray_cfg.fin_mode = models::FinMode::none;
    gray_cfg.head = models::widen_head_for_parity(gray_cfg, target);

    models::ClassifierConfig rgb_cfg = spec.classifier;
    rgb_cfg.num_classes = classes;
    rgb_cfg.fin_mode = models::FinMode::none;
    rgb_cfg.in_channels = 3;
    rgb_cfg.head = models::widen_head_for_parity(rgb_cfg, target);

    {
        const auto rgb = models::build_cnn_classifier(rgb_cfg, 1);
        const auto gray = models::build_cnn_classifier(gray_cfg, 1);
        const auto fincnn = models::build_fin_cnn_classifier(fin_cfg, ens, 1);
        report.parity = models::parameter_parity({{"cnn_rgb", &rgb},
                                                  {"cnn_gray", &gray},
                                                  {"fin_cnn", &fincnn.graph}});
        if (report.parity.spread > 0.05)
            throw Error("exp2: parameter parity exceeded 5%");
    }

    const int n = static_cast<int>(data.size());
    const int n_units = spec.repeats * 3;
    std::vector<RunRecord> records(static_cast<size_t>(n_units));
    parallel_for(n_units, spec.workers, [&](int unit) {
        const int r = unit / 3;
        const int midx = unit % 3;

        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        Pcg64 rng = derive_rng(spec.seed, rng_domain::kfold,
                               static_cast<uint64_t>(r) + 1);
        rng.shuffle(order);
        const int n_train = (n * 8) / 10;
        const int n_val = n / 10;
        const std::vector<int> train_idx(order.begin(), order.begin() + n_train);
        const std::vector<int> val_idx(order.begin() + n_train,
                                       order.begin() + n_train + n_val);
        const std::vector<int> test_idx(order.begin() + n_train + n_val, order.end());

        const uint64_t build_seed =
            mix_seed(spec.seed, rng_domain::experiment,
                     kTagBuildBase + static_cast<uint64_t>(unit));
        TrainConfig tc = spec.train;
        tc.seed = mix_seed(spec.seed, rng_domain::experiment,
                           kTagTrainBase + static_cast<uint64_t>(unit));
        tc.loss = neural::LossKind::cross_entropy;

        neural::ModelGraph<float> model;
        std::function<neural::Tensor<float>(int)> input_of;
        if (midx == 0) {
            model = models::build_cnn_classifier(rgb_cfg, build_seed);
            input_of = [&data](int i) {
                return chw_tensor(data.images[static_cast<size_t>(i)], 3);
            };
        } else if (midx == 1) {
            model = models::build_cnn_classifier(gray_cfg, build_seed);
            input_of = [&data](int i) {
                return chw_tensor(data.images[static_cast<size_t>(i)]);
            };
        } else {
            model = models::build_fin_cnn_classifier(fin_cfg, ens, build_seed).graph;
            input_of = [&data](int i) {
                return chw_tensor(data.images[static_cast<size_t>(i)]);
            };
        }
        records[static_cast<size_t>(unit)] = run_classifier_unit(
            report.model_names[static_cast<size_t>(midx)], std::move(model),
            input_of, data, train_idx, val_idx, test_idx, tc, r,
            report.metric_names, progress);
    });
    report.records = std::move(records);
    return report;
}

ExperimentReport run_exp3(const ExperimentSpec& spec, std::ostream* progress) {
    ExperimentReport report;
    report.task = spec.task;
    report.metric_names = {"iou", "dice"};
    report.model_names = {"unet", "fin_unet"};

    Dataset data = gen_blob_dataset(spec.n, spec.seed);
    std::vector<int> train_idx, val_idx, test_idx;
    for (size_t i = 0; i < data.size(); ++i) {
        switch (data.tags[i]) {
            case SplitTag::train: train_idx.push_back(static_cast<int>(i)); break;
            case SplitTag::val: val_idx.push_back(static_cast<int>(i)); break;
            default: test_idx.push_back(static_cast<int>(i)); break;
        }
    }

    // FIN pretraining corpus: grid patches of a disjoint blob corpus.
    const int patch_target = std::max(spec.fin_corpus_n, 100);
    Dataset pre = gen_blob_dataset(
        50, mix_seed(spec.seed, rng_domain::experiment, kTagPretrainCorpus));
    std::vector<imaging::GrayImage> patches;
    for (const auto& img : pre.images) {
        const imaging::PatchGrid grid =
            imaging::patch_grid(img, spec.unet.grid, spec.unet.grid);
        for (const auto& p : grid.patches) patches.push_back(p);
    }
    {
        Pcg64 rng = derive_rng(spec.seed, rng_domain::experiment, kTagPatchShuffle);
        rng.shuffle(patches);
        if (static_cast<int>(patches.size()) > patch_target)
            patches.resize(static_cast<size_t>(patch_target));
    }
    const fin::FinEnsemble ens = pretrain_ensemble(patches, spec, progress);

    models::UnetConfig fin_cfg = spec.unet;
    fin_cfg.fin_mode = models::FinMode::embedded_finetune;
    const size_t target = models::count_fin_unet_parameters(fin_cfg, ens);
    models::UnetConfig base_cfg = spec.unet;
    base_cfg.fin_mode = models::FinMode::none;
    base_cfg.bottleneck_extra = models::unet_extra_for_parity(base_cfg, target);

    {
        const auto unet = models::build_unet(base_cfg, 1);
        const auto finunet = models::build_fin_unet(fin_cfg, ens, 1);
        report.parity = models::parameter_parity(
            {{"unet", &unet}, {"fin_unet", &finunet.graph}});
        if (report.parity.spread > 0.05)
            throw Error("exp3: parameter parity exceeded 5%");
    }

    std::vector<RunRecord> records(2);
    parallel_for(2, spec.workers, [&](int midx) {
        const uint64_t build_seed =
            mix_seed(spec.seed, rng_domain::experiment,
                     kTagBuildBase + static_cast<uint64_t>(midx));
        TrainConfig tc = spec.train;
        tc.seed = mix_seed(spec.seed, rng_domain::experiment,
                           kTagTrainBase + static_cast<uint64_t>(midx));

        neural::ModelGraph<float> model =
            midx == 0 ? models::build_unet(base_cfg, build_seed)
                      : models::build_fin_unet(fin_cfg, ens, build_seed).graph;

        auto mask_of = [&data](const neural::Tensor<float>& pred, int i) {
            imaging::GrayImage m(data.masks[static_cast<size_t>(i)].width,
                                 data.masks[static_cast<size_t>(i)].height);
            for (size_t j = 0; j < pred.data.size(); ++j)
                m.data[j] = pred.data[j] >= 0.5f ? 1.0 : 0.0;
            return m;
        };

        TrainData td;
        td.input = [&data](int i) {
            return chw_tensor(data.images[static_cast<size_t>(i)]);
        };
        td.target = [&data](int i) {
            return chw_tensor(data.masks[static_cast<size_t>(i)]);
        };
        td.train_indices = train_idx;
        td.val_indices = val_idx;
        td.val_metrics = [&](const neural::Tensor<float>& pred, int i) {
            return iou_dice(mask_of(pred, i), data.masks[static_cast<size_t>(i)]);
        };

        const TrainHistory hist = train_model(model, td, tc, progress, midx);

        RunRecord rec;
        rec.model = report.model_names[static_cast<size_t>(midx)];
        rec.run = 0;
        rec.convergence_epoch = hist.convergence_epoch;
        rec.curve = hist.epochs;
        double iou_sum = 0.0, dice_sum = 0.0;
        for (int i : test_idx) {
            const neural::Tensor<float> pred = forward(model, td.input(i));
            const auto [iou, dice] =
                iou_dice(mask_of(pred, i), data.masks[static_cast<size_t>(i)]);
            iou_sum += iou;
            dice_sum += dice;
        }
        rec.metric_a = iou_sum / static_cast<double>(test_idx.size());
        rec.metric_b = dice_sum / static_cast<double>(test_idx.size());
        records[static_cast<size_t>(midx)] = std::move(rec);
    });
    report.records = std::move(records);
    return report;
}

} // namespace

ExperimentSpec parse_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    if (!j.is_object()) throw InvalidArgument("experiment spec must be a JSON object");
    spec.task = j.value("task", spec.task);
    if (spec.task != "exp1-analogue" && spec.task != "exp2-analogue" &&
        spec.task != "exp3-analogue")
        throw InvalidArgument("experiment spec: unknown task '" + spec.task + "'");
    spec.seed = j.value("seed", spec.seed);
    spec.workers = j.value("workers", spec.workers);
    spec.n = j.value("n", spec.task == "exp3-analogue" ? 600 : 2000);
    spec.classes = j.value("classes", spec.task == "exp2-analogue" ? 4 : 2);
    spec.imbalance = j.value("imbalance", spec.imbalance);
    spec.folds = j.value("folds", spec.folds);
    spec.repeats = j.value("repeats", spec.repeats);
    spec.emit_svg = j.value("emit_svg", spec.emit_svg);
    spec.fin_corpus_n = j.value("fin_corpus_n", spec.fin_corpus_n);

    if (j.contains("train")) {
        const auto& t = j["train"];
        spec.train.lr = t.value("lr", spec.train.lr);
        spec.train.batch_size = t.value("batch_size", spec.train.batch_size);
        spec.train.max_epochs = t.value("max_epochs", spec.train.max_epochs);
        spec.train.patience = t.value("patience", spec.train.patience);
        spec.train.delta = t.value("delta", spec.train.delta);
        if (t.contains("loss"))
            spec.train.loss = neural::loss_from_name(t["loss"].get<std::string>());
    } else if (spec.task == "exp3-analogue") {
        spec.train.loss = neural::LossKind::bce;
    }
    if (spec.task == "exp3-analogue" && !j.contains("train"))
        spec.train.max_epochs = 8;

    if (j.contains("classifier")) {
        const auto& c = j["classifier"];
        spec.classifier.input_width = c.value("input_width", spec.classifier.input_width);
        spec.classifier.input_height = c.value("input_height", spec.classifier.input_height);
        spec.classifier.conv_stages =
            c.value("conv_stages", spec.classifier.conv_stages);
        spec.classifier.head = c.value("head", spec.classifier.head);
    }
    if (j.contains("dfnn_widths"))
        spec.dfnn_widths = j["dfnn_widths"].get<std::vector<int>>();
    if (j.contains("unet")) {
        const auto& u = j["unet"];
        spec.unet.input_width = u.value("input_width", spec.unet.input_width);
        spec.unet.input_height = u.value("input_height", spec.unet.input_height);
        spec.unet.base_filters = u.value("base_filters", spec.unet.base_filters);
        spec.unet.depth = u.value("depth", spec.unet.depth);
        spec.unet.grid = u.value("grid", spec.unet.grid);
    }
    if (j.contains("fin_pretrain")) {
        const auto& f = j["fin_pretrain"];
        spec.fin_pretrain.topologies = f.value("topologies", spec.fin_pretrain.topologies);
        spec.fin_pretrain.max_epochs = f.value("max_epochs", spec.fin_pretrain.max_epochs);
        spec.fin_pretrain.patience = f.value("patience", spec.fin_pretrain.patience);
        spec.fin_pretrain.delta = f.value("delta", spec.fin_pretrain.delta);
        spec.fin_pretrain.lr = f.value("lr", spec.fin_pretrain.lr);
        spec.fin_pretrain.batch_size = f.value("batch_size", spec.fin_pretrain.batch_size);
        spec.fin_pretrain.ng = f.value("ng", spec.fin_pretrain.ng);
    }
    validate(spec.train);
    return spec;
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["task"] = spec.task;
    j["seed"] = spec.seed;
    j["workers"] = spec.workers;
    j["n"] = spec.n;
    j["classes"] = spec.classes;
    j["imbalance"] = spec.imbalance;
    j["folds"] = spec.folds;
    j["repeats"] = spec.repeats;
    j["emit_svg"] = spec.emit_svg;
    j["fin_corpus_n"] = spec.fin_corpus_n;
    j["train"] = {{"lr", spec.train.lr},
                  {"batch_size", spec.train.batch_size},
                  {"max_epochs", spec.train.max_epochs},
                  {"patience", spec.train.patience},
                  {"delta", spec.train.delta},
                  {"loss", neural::loss_name(spec.train.loss)}};
    j["classifier"] = {{"input_width", spec.classifier.input_width},
                       {"input_height", spec.classifier.input_height},
                       {"conv_stages", spec.classifier.conv_stages},
                       {"head", spec.classifier.head}};
    j["dfnn_widths"] = spec.dfnn_widths;
    j["unet"] = {{"input_width", spec.unet.input_width},
                 {"input_height", spec.unet.input_height},
                 {"base_filters", spec.unet.base_filters},
                 {"depth", spec.unet.depth},
                 {"grid", spec.unet.grid}};
    j["fin_pretrain"] = {{"topologies", spec.fin_pretrain.topologies},
                         {"max_epochs", spec.fin_pretrain.max_epochs},
                         {"patience", spec.fin_pretrain.patience},
                         {"delta", spec.fin_pretrain.delta},
                         {"lr", spec.fin_pretrain.lr},
                         {"batch_size", spec.fin_pretrain.batch_size},
                         {"ng", spec.fin_pretrain.ng}};
    return j;
}

ModelAggregate aggregate(const ExperimentReport& report, const std::string& model) {
    std::vector<double> a, b, epochs;
    for (const auto& rec : report.records) {
        if (rec.model != model) continue;
        a.push_back(rec.metric_a);
        b.push_back(rec.metric_b);
        epochs.push_back(static_cast<double>(rec.convergence_epoch));
    }
    if (a.empty())
        throw InvalidArgument("aggregate: no records for model " + model);
    auto mean_of = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    auto std_of = [&](const std::vector<double>& v, double mean) {
        double acc = 0.0;
        for (double x : v) acc += (x - mean) * (x - mean);
        return std::sqrt(acc / static_cast<double>(v.size())); // population
    };
    ModelAggregate agg;
    agg.model = model;
    agg.metric_a_mean = mean_of(a);
    agg.metric_a_std = std_of(a, agg.metric_a_mean);
    agg.metric_b_mean = mean_of(b);
    agg.metric_b_std = std_of(b, agg.metric_b_mean);
    agg.epochs_mean = mean_of(epochs);
    return agg;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, std::ostream* progress) {
    validate(spec.train);
    ExperimentReport report;
    if (spec.task == "exp1-analogue") report = run_exp1(spec, progress);
    else if (spec.task == "exp2-analogue") report = run_exp2(spec, progress);
    else if (spec.task == "exp3-analogue") report = run_exp3(spec, progress);
    else throw InvalidArgument("run_experiment: unknown task " + spec.task);
    report.spec_echo = spec_to_json(spec);
    report.emit_svg = spec.emit_svg;
    return report;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["task"] = report.task;
    j["metric_names"] = report.metric_names;
    j["model_names"] = report.model_names;
    j["spec"] = report.spec_echo;
    j["std_convention"] = "population";
    j["f1_averaging"] = "macro";
    j["emit_svg"] = report.emit_svg;
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& [name, count] : report.parity.counts)
        counts.push_back({{"model", name}, {"parameters", count}});
    j["parity"] = {{"counts", counts}, {"spread", report.parity.spread}};

    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : report.records) {
        nlohmann::json r;
        r["model"] = rec.model;
        r["run"] = rec.run;
        r["metric_a"] = rec.metric_a;
        r["metric_b"] = rec.metric_b;
        r["convergence_epoch"] = rec.convergence_epoch;
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& e : rec.curve) {
            nlohmann::json ej;
            ej["epoch"] = e.epoch;
            ej["train_loss"] = e.train_loss;
            ej["val_loss"] = e.val_loss;
            if (e.has_metrics) {
                ej["train_metric_a"] = e.train_metric_a;
                ej["train_metric_b"] = e.train_metric_b;
                ej["val_metric_a"] = e.val_metric_a;
                ej["val_metric_b"] = e.val_metric_b;
            }
            curve.push_back(std::move(ej));
        }
        r["curve"] = std::move(curve);
        records.push_back(std::move(r));
    }
    j["records"] = std::move(records);

    nlohmann::json aggs = nlohmann::json::array();
    for (const auto& name : report.model_names) {
        const ModelAggregate agg = aggregate(report, name);
        aggs.push_back({{"model", agg.model},
                        {"metric_a_mean", agg.metric_a_mean},
                        {"metric_a_std", agg.metric_a_std},
                        {"metric_b_mean", agg.metric_b_mean},
                        {"metric_b_std", agg.metric_b_std},
                        {"epochs_mean", agg.epochs_mean}});
    }
    j["aggregates"] = std::move(aggs);
    return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
    ExperimentReport report;
    report.task = j.at("task").get<std::string>();
    report.metric_names = j.at("metric_names").get<std::vector<std::string>>();
    report.model_names = j.at("model_names").get<std::vector<std::string>>();
    report.spec_echo = j.value("spec", nlohmann::json::object());
    report.emit_svg = j.value("emit_svg", true);
    for (const auto& c : j.at("parity").at("counts"))
        report.parity.counts.emplace_back(c.at("model").get<std::string>(),
                                          c.at("parameters").get<size_t>());
    report.parity.spread = j.at("parity").at("spread").get<double>();
    for (const auto& r : j.at("records")) {
        RunRecord rec;
        rec.model = r.at("model").get<std::string>();
        rec.run = r.at("run").get<int>();
        rec.metric_a = r.at("metric_a").get<double>();
        rec.metric_b = r.at("metric_b").get<double>();
        rec.convergence_epoch = r.at("convergence_epoch").get<int>();
        for (const auto& e : r.at("curve")) {
            EpochRecord er;
            er.epoch = e.at("epoch").get<int>();
            er.train_loss = e.at("train_loss").get<double>();
            er.val_loss = e.at("val_loss").get<double>();
            if (e.contains("val_metric_a")) {
                er.has_metrics = true;
                er.train_metric_a = e.at("train_metric_a").get<double>();
                er.train_metric_b = e.at("train_metric_b").get<double>();
                er.val_metric_a = e.at("val_metric_a").get<double>();
                er.val_metric_b = e.at("val_metric_b").get<double>();
            }
            rec.curve.push_back(er);
        }
        report.records.push_back(std::move(rec));
    }
    return report;
}

namespace {

bool report_has_curve_metrics(const ExperimentReport& report) {
    for (const auto& rec : report.records)
        for (const auto& e : rec.curve)
            if (e.has_metrics) return true;
    return false;
}

struct CurvePoint {
    int epoch;
    double loss;
    double metric_a = 0.0;
    double metric_b = 0.0;
};

// Mean over runs of a model's per-epoch values, for one split.
std::vector<CurvePoint> mean_curve(const ExperimentReport& report,
                                   const std::string& model, bool val_side) {
    std::vector<CurvePoint> out;
    for (int epoch = 1;; ++epoch) {
        double loss = 0.0, ma = 0.0, mb = 0.0;
        int count = 0;
        for (const auto& rec : report.records) {
            if (rec.model != model) continue;
            if (epoch > static_cast<int>(rec.curve.size())) continue;
            const EpochRecord& e = rec.curve[static_cast<size_t>(epoch - 1)];
            loss += val_side ? e.val_loss : e.train_loss;
            ma += val_side ? e.val_metric_a : e.train_metric_a;
            mb += val_side ? e.val_metric_b : e.train_metric_b;
            ++count;
        }
        if (count == 0) break;
        out.push_back({epoch, loss / count, ma / count, mb / count});
    }
    return out;
}

void write_svg(const ExperimentReport& report, const std::filesystem::path& path);

} // namespace

void emit_csvs(const ExperimentReport& report, const std::filesystem::path& dir) {
    const bool with_metrics = report_has_curve_metrics(report);

    {
        std::ofstream out(dir / "summary.csv");
        if (!out) throw IoError("cannot write summary.csv in " + dir.string());
        out << "model";
        for (const auto& m : report.metric_names)
            out << "," << m << "_mean," << m << "_std";
        out << ",epochs_mean\n";
        for (const auto& name : report.model_names) {
            const ModelAggregate agg = aggregate(report, name);
            out << name << "," << fmt_g(agg.metric_a_mean) << ","
                << fmt_g(agg.metric_a_std);
            if (report.metric_names.size() > 1)
                out << "," << fmt_g(agg.metric_b_mean) << ","
                    << fmt_g(agg.metric_b_std);
            out << "," << fmt_g(agg.epochs_mean) << "\n";
        }
    }

    {
        std::ofstream out(dir / "curves.csv");
        if (!out) throw IoError("cannot write curves.csv in " + dir.string());
        out << "epoch,model,split,loss";
        if (with_metrics)
            for (const auto& m : report.metric_names) out << "," << m;
        out << "\n";
        for (const auto& name : report.model_names) {
            for (const bool val_side : {false, true}) {
                for (const CurvePoint& p : mean_curve(report, name, val_side)) {
                    out << p.epoch << "," << name << ","
                        << (val_side ? "val" : "train") << "," << fmt_g(p.loss);
                    if (with_metrics)
                        out << "," << fmt_g(p.metric_a) << "," << fmt_g(p.metric_b);
                    out << "\n";
                }
            }
        }
    }
}

void emit_report(const ExperimentReport& report, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "report.json");
        if (!out) throw IoError("cannot write report.json in " + dir.string());
        out << report_to_json(report).dump(2) << "\n";
    }
    emit_csvs(report, dir);
    if (report.emit_svg) write_svg(report, dir / "curves.svg");
}

ExperimentReport load_report(const std::filesystem::path& dir) {
    std::ifstream in(dir / "report.json");
    if (!in) throw IoError("cannot open " + (dir / "report.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("report.json is not valid JSON: " +
                               std::string(e.what()));
    }
    return report_from_json(j);
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c",
                          "#9467bd", "#ff7f0e", "#8c564b"};

void write_svg(const ExperimentReport& report, const std::filesystem::path& path) {
    const bool with_metrics = report_has_curve_metrics(report);
    struct Panel {
        std::string title;
        int value_index; // 0 = loss, 1 = metric_a, 2 = metric_b
    };
    std::vector<Panel> panels = {{"loss", 0}};
    if (with_metrics) {
        panels.push_back({report.metric_names[0], 1});
        if (report.metric_names.size() > 1)
            panels.push_back({report.metric_names[1], 2});
    }

    const int pw = 640, ph = 220, margin = 42;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << pw
        << "\" height=\"" << ph * panels.size() << "\">\n";

    for (size_t pi = 0; pi < panels.size(); ++pi) {
        const int top = static_cast<int>(pi) * ph;
        double vmin = 1e300, vmax = -1e300;
        int emax = 1;
        auto value_of = [&](const CurvePoint& p) {
            return panels[pi].value_index == 0
                       ? p.loss
                       : (panels[pi].value_index == 1 ? p.metric_a : p.metric_b);
        };
        for (const auto& name : report.model_names)
            for (bool val_side : {false, true})
                for (const CurvePoint& p : mean_curve(report, name, val_side)) {
                    vmin = std::min(vmin, value_of(p));
                    vmax = std::max(vmax, value_of(p));
                    emax = std::max(emax, p.epoch);
                }
        if (vmin > vmax) { vmin = 0.0; vmax = 1.0; }
        if (vmax - vmin < 1e-12) vmax = vmin + 1.0;

        auto sx = [&](double epoch) {
            return margin + (epoch - 1.0) / std::max(1.0, emax - 1.0) *
                                (pw - 2.0 * margin);
        };
        auto sy = [&](double v) {
            return top + ph - margin - (v - vmin) / (vmax - vmin) * (ph - 2.0 * margin);
        };

        out << "<text x=\"" << margin << "\" y=\"" << top + 16
            << "\" font-size=\"12\" font-family=\"sans-serif\">"
            << panels[pi].title << "</text>\n";
        out << "<line x1=\"" << margin << "\" y1=\"" << top + ph - margin
            << "\" x2=\"" << pw - margin << "\" y2=\"" << top + ph - margin
            << "\" stroke=\"#888\"/>\n";
        out << "<line x1=\"" << margin << "\" y1=\"" << top + margin << "\" x2=\""
            << margin << "\" y2=\"" << top + ph - margin
            << "\" stroke=\"#888\"/>\n";
        out << "<text x=\"4\" y=\"" << sy(vmax) + 4
            << "\" font-size=\"10\" font-family=\"sans-serif\">" << fmt_g(vmax)
            << "</text>\n";
        out << "<text x=\"4\" y=\"" << sy(vmin) + 4
            << "\" font-size=\"10\" font-family=\"sans-serif\">" << fmt_g(vmin)
            << "</text>\n";

        for (size_t mi = 0; mi < report.model_names.size(); ++mi) {
            for (bool val_side : {false, true}) {
                const auto curve = mean_curve(report, report.model_names[mi], val_side);
                if (curve.empty()) continue;
                out << "<polyline fill=\"none\" stroke=\""
                    << kPalette[mi % 6] << "\"";
                if (val_side) out << " stroke-dasharray=\"5,3\"";
                out << " stroke-width=\"1.5\" points=\"";
                for (const CurvePoint& p : curve)
                    out << fmt_g(sx(p.epoch)) << "," << fmt_g(sy(value_of(p))) << " ";
                out << "\"/>\n";
            }
            out << "<text x=\"" << pw - margin + 4 << "\" y=\""
                << top + margin + 14 * static_cast<int>(mi)
                << "\" font-size=\"10\" font-family=\"sans-serif\" fill=\""
                << kPalette[mi % 6] << "\">" << report.model_names[mi]
                << "</text>\n";
        }
    }
    out << "</svg>\n";
}

} // namespace

} // namespace finrad::harness
