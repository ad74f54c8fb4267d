#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrad/dataset.hpp"
#include "finrad/fin.hpp"
#include "finrad/models.hpp"
#include "finrad/trainer.hpp"

namespace finrad::harness {

/// Declarative description of one experiment run, parsed from JSON.
/// Tasks:
///   exp1-analogue  10-fold binary classification; feature-DFNN vs CNN vs
///                  FIN-CNN; AUROC and convergence epochs per fold.
///   exp2-analogue  repeated-shuffle multi-class classification; RGB CNN vs
///                  gray CNN vs FIN-CNN; macro-F1 and accuracy per repeat.
///   exp3-analogue  segmentation on the blob corpus; U-net vs FIN-U-net;
///                  per-epoch loss/IoU/Dice curves and test IoU/Dice.
struct ExperimentSpec {
    std::string task = "exp1-analogue";
    uint64_t seed = 7;
    int workers = 1;

    int n = 2000;
    int classes = 2;
    double imbalance = 8.0;
    int folds = 10;
    int repeats = 8;

    TrainConfig train;
    models::ClassifierConfig classifier;
    std::vector<int> dfnn_widths = {64, 64};
    models::UnetConfig unet;

    fin::FinTrainConfig fin_pretrain;
    int fin_corpus_n = 600;

    bool emit_svg = true;
};

ExperimentSpec parse_spec(const nlohmann::json& j);
nlohmann::json spec_to_json(const ExperimentSpec& spec);

struct RunRecord {
    std::string model;
    int run = 0; // fold or repeat index
    double metric_a = 0.0;
    double metric_b = 0.0;
    int convergence_epoch = 0;
    std::vector<EpochRecord> curve;
};

struct ModelAggregate {
    std::string model;
    double metric_a_mean = 0.0, metric_a_std = 0.0;
    double metric_b_mean = 0.0, metric_b_std = 0.0;
    double epochs_mean = 0.0;
};

struct ExperimentReport {
    std::string task;
    std::vector<std::string> metric_names; // 1 or 2 entries
    std::vector<std::string> model_names;  // emission order
    nlohmann::json spec_echo;
    models::ParityReport parity;
    std::vector<RunRecord> records;
    bool emit_svg = true;
};

/// Mean and population standard deviation over a model's run records,
/// recomputed from the records themselves.
ModelAggregate aggregate(const ExperimentReport& report, const std::string& model);

ExperimentReport run_experiment(const ExperimentSpec& spec,
                                std::ostream* progress = nullptr);

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

/// Writes report.json, summary.csv, curves.csv (and curves.svg when the
/// report asks for it) into dir.
void emit_report(const ExperimentReport& report, const std::filesystem::path& dir);
void emit_csvs(const ExperimentReport& report, const std::filesystem::path& dir);
ExperimentReport load_report(const std::filesystem::path& dir);

} // namespace finrad::harness
