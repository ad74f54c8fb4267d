#include "finrad/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "finrad/dataset.hpp"
#include "finrad/errors.hpp"
#include "finrad/experiment.hpp"
#include "finrad/fin.hpp"
#include "finrad/image_io.hpp"
#include "finrad/parallel.hpp"
#include "finrad/radiomics.hpp"

namespace finrad::cli {

namespace {

struct GenDataOpts {
    std::string task;
    int n = 0;
    int classes = 2;
    uint64_t seed = 0;
    std::string out;
};

struct ExtractOpts {
    std::string manifest;
    int bins = radiomics::kDefaultGrayLevels;
    std::string out;
};

struct TrainFinOpts {
    std::string feature;
    std::string manifest;
    int synthetic = 0;
    int topologies = fin::FinTrainConfig{}.topologies;
    uint64_t seed = 0;
    std::string out;
};

struct EvalFinOpts {
    std::string fin_path;
    std::string manifest;
};

struct RunExpOpts {
    std::string spec_path;
    std::string out;
};

struct ReportOpts {
    std::string in_dir;
    std::string format;
};

int do_gen_data(const GenDataOpts& o, int workers, bool verbose) {
    (void)workers;
    harness::Dataset d;
    if (o.task == "texture") {
        d = harness::gen_texture_dataset(o.n, o.classes, o.seed);
    } else if (o.task == "blob") {
        d = harness::gen_blob_dataset(o.n, o.seed);
    } else {
        throw InvalidArgument("gen-data: task must be texture or blob");
    }
    harness::write_dataset(d, o.out);
    if (verbose)
        std::cerr << "# wrote " << d.size() << " items to " << o.out << "\n";
    return 0;
}

int do_extract(const ExtractOpts& o, int workers, bool verbose) {
    const std::filesystem::path manifest(o.manifest);
    const std::vector<std::string> paths = harness::manifest_paths(manifest);
    const std::filesystem::path base = manifest.parent_path();

    std::vector<radiomics::FeatureVector> features(paths.size());
    parallel_for(static_cast<int>(paths.size()), workers, [&](int i) {
        const imaging::GrayImage img =
            imaging::load_image(base / paths[static_cast<size_t>(i)]);
        features[static_cast<size_t>(i)] = radiomics::extract_features(img, o.bins);
    });

    std::ofstream out(o.out);
    if (!out) throw IoError("cannot write " + o.out);
    radiomics::write_feature_csv_header(out);
    for (size_t i = 0; i < paths.size(); ++i)
        radiomics::write_feature_csv_row(out, paths[i], features[i]);
    if (verbose) std::cerr << "# extracted " << paths.size() << " rows\n";
    return 0;
}

int do_train_fin(const TrainFinOpts& o, int workers, bool verbose) {
    if (o.manifest.empty() == (o.synthetic == 0))
        throw InvalidArgument(
            "train-fin: exactly one of --manifest / --synthetic is required");

    std::vector<imaging::GrayImage> corpus;
    if (o.synthetic > 0) {
        corpus = harness::gen_texture_dataset(o.synthetic, 2, o.seed).images;
    } else {
        const std::filesystem::path manifest(o.manifest);
        const std::filesystem::path base = manifest.parent_path();
        for (const std::string& p : harness::manifest_paths(manifest)) {
            imaging::GrayImage img = imaging::load_image(base / p);
            if (img.width != 64 || img.height != 64)
                img = imaging::resize(img, 64, 64);
            corpus.push_back(std::move(img));
        }
    }

    fin::FinTrainConfig cfg;
    cfg.topologies = o.topologies;
    cfg.seed = o.seed;
    cfg.workers = workers;
    auto [model, report] = fin::train_fin(o.feature, corpus, cfg);
    fin::save_fin(model, o.out);

    nlohmann::json j = {{"feature_id", report.feature_id},
                        {"r2", report.r2},
                        {"mae", report.mae},
                        {"val_mse", report.val_mse},
                        {"epochs_trained", report.epochs_trained},
                        {"hidden", report.topology.hidden}};
    std::cout << j.dump(2) << "\n";
    if (verbose) std::cerr << "# saved " << o.out << "\n";
    return 0;
}

int do_eval_fin(const EvalFinOpts& o) {
    const fin::FinModel model = fin::load_fin(o.fin_path);
    const std::filesystem::path manifest(o.manifest);
    const std::filesystem::path base = manifest.parent_path();
    std::vector<imaging::GrayImage> corpus;
    for (const std::string& p : harness::manifest_paths(manifest)) {
        imaging::GrayImage img = imaging::load_image(base / p);
        if (img.width != model.input_width || img.height != model.input_height)
            img = imaging::resize(img, model.input_width, model.input_height);
        corpus.push_back(std::move(img));
    }
    const fin::ImitationReport report = fin::evaluate_fin(model, corpus);
    nlohmann::json j = {{"feature_id", report.feature_id},
                        {"r2", report.r2},
                        {"mae", report.mae},
                        {"val_mse", report.val_mse}};
    std::cout << j.dump(2) << "\n";
    return 0;
}

int do_run_exp(const RunExpOpts& o, int workers, bool verbose) {
    std::ifstream in(o.spec_path);
    if (!in) throw IoError("cannot open spec " + o.spec_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError("experiment spec is not valid JSON: " +
                               std::string(e.what()));
    }
    harness::ExperimentSpec spec = harness::parse_spec(j);
    spec.workers = workers;
    const harness::ExperimentReport report =
        harness::run_experiment(spec, verbose ? &std::cerr : nullptr);
    harness::emit_report(report, o.out);
    return 0;
}

int do_report(const ReportOpts& o) {
    const harness::ExperimentReport report = harness::load_report(o.in_dir);
    if (o.format == "json") {
        std::cout << harness::report_to_json(report).dump(2) << "\n";
    } else if (o.format == "csv") {
        harness::emit_csvs(report, o.in_dir);
    } else {
        throw InvalidArgument("report: format must be csv or json");
    }
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"Radiomics feature-imitating networks: exact features, "
                 "imitator training, and experiment harness"};
    app.require_subcommand(1);

    int workers = 1;
    bool verbose = false;
    app.add_option("--workers", workers, "Worker thread cap (default 1)")
        ->capture_default_str();
    app.add_flag("--verbose", verbose, "Progress lines on the diagnostic stream");

    GenDataOpts gen;
    CLI::App* gen_cmd =
        app.add_subcommand("gen-data", "Generate a synthetic dataset (PGM + manifest)");
    gen_cmd->add_option("--task", gen.task, "texture | blob")->required();
    gen_cmd->add_option("--n", gen.n, "Number of items")->required();
    gen_cmd->add_option("--classes", gen.classes, "Class count (texture)")
        ->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "RNG seed")->required();
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();

    ExtractOpts ext;
    CLI::App* ext_cmd =
        app.add_subcommand("extract", "Compute the six features for a manifest");
    ext_cmd->add_option("--manifest", ext.manifest, "Manifest CSV")->required();
    ext_cmd->add_option("--bins", ext.bins, "Gray levels for discretization")
        ->capture_default_str();
    ext_cmd->add_option("--out", ext.out, "Output CSV")->required();

    TrainFinOpts tf;
    CLI::App* tf_cmd =
        app.add_subcommand("train-fin", "Train one feature-imitating network");
    tf_cmd->add_option("--feature", tf.feature, "Feature name")->required();
    tf_cmd->add_option("--manifest", tf.manifest, "Image corpus manifest");
    tf_cmd->add_option("--synthetic", tf.synthetic,
                       "Generate a synthetic corpus of N images instead");
    tf_cmd->add_option("--topologies", tf.topologies, "Candidate topologies")
        ->capture_default_str();
    tf_cmd->add_option("--seed", tf.seed, "RNG seed")->required();
    tf_cmd->add_option("--out", tf.out, "Output model file")->required();

    EvalFinOpts ef;
    CLI::App* ef_cmd =
        app.add_subcommand("eval-fin", "Evaluate a trained FIN on a manifest");
    ef_cmd->add_option("--fin", ef.fin_path, "FIN model file")->required();
    ef_cmd->add_option("--manifest", ef.manifest, "Image corpus manifest")->required();

    RunExpOpts re;
    CLI::App* re_cmd = app.add_subcommand("run-exp", "Run an experiment spec");
    re_cmd->add_option("--spec", re.spec_path, "Experiment spec JSON")->required();
    re_cmd->add_option("--out", re.out, "Output directory")->required();

    ReportOpts rep;
    CLI::App* rep_cmd =
        app.add_subcommand("report", "Re-emit a stored experiment report");
    rep_cmd->add_option("--in", rep.in_dir, "Report directory")->required();
    rep_cmd->add_option("--format", rep.format, "csv | json")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e); // prints help, exit 0
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cerr << "run with --help for usage\n";
        return 1;
    }

    try {
        if (gen_cmd->parsed()) return do_gen_data(gen, workers, verbose);
        if (ext_cmd->parsed()) return do_extract(ext, workers, verbose);
        if (tf_cmd->parsed()) return do_train_fin(tf, workers, verbose);
        if (ef_cmd->parsed()) return do_eval_fin(ef);
        if (re_cmd->parsed()) return do_run_exp(re, workers, verbose);
        if (rep_cmd->parsed()) return do_report(rep);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace finrad::cli
