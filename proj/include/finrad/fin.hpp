#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "finrad/image.hpp"
#include "finrad/net.hpp"
#include "finrad/radiomics.hpp"

namespace finrad::fin {

/// Dense-net search space: 2-4 hidden ReLU layers with widths from
/// {32, 64, 128, 256}; one linear output unit.
struct TopologySpec {
    std::vector<int> hidden;
};

std::vector<TopologySpec> sample_topologies(int k, uint64_t seed);

/// A trained imitator. The network regresses the z-scored feature from the
/// flattened image; raw predictions are output * target_std + target_mean.
struct FinModel {
    std::string feature_id;
    TopologySpec topology;
    neural::ModelGraph<float> net; // input {w*h} -> ... -> dense(1), normalized
    double target_mean = 0.0;
    double target_std = 1.0;
    int input_width = 0;
    int input_height = 0;

    float predict_normalized(const imaging::GrayImage& img) const;
    double predict(const imaging::GrayImage& img) const; // de-normalized
};

struct ImitationReport {
    std::string feature_id;
    double r2 = 0.0;      // on held-out data, raw units
    double mae = 0.0;     // raw units
    double val_mse = 0.0; // normalized space
    int epochs_trained = 0;
    TopologySpec topology;
};

struct FinTrainConfig {
    int topologies = 12;   // candidate count for the random search
    int max_epochs = 200;
    int patience = 10;
    double delta = 1e-4;
    double lr = 1e-3;
    int batch_size = 32;
    uint64_t seed = 0;
    int ng = radiomics::kDefaultGrayLevels;
    int workers = 1;
};

/// Trains one FIN: computes feature targets, z-scores them over the 80%
/// train split (80/10/10 by seeded shuffle), trains every sampled topology,
/// and retains the one with the lowest validation MSE (lowest candidate
/// index on ties). The report evaluates the retained model on the 10% test
/// split in raw units. Requires >= 100 images of uniform geometry and a
/// non-degenerate target distribution.
std::pair<FinModel, ImitationReport> train_fin(
    const std::string& feature_id, const std::vector<imaging::GrayImage>& corpus,
    const FinTrainConfig& cfg);

ImitationReport evaluate_fin(const FinModel& model,
                             const std::vector<imaging::GrayImage>& corpus,
                             int ng = radiomics::kDefaultGrayLevels);

/// Six FINs in FeatureVector order with the target de-normalization folded
/// into each final dense layer, so member networks emit raw feature
/// estimates and embedding them elsewhere is a plain weight copy.
struct FinEnsemble {
    struct Member {
        std::string feature_id;
        TopologySpec topology;
        neural::ModelGraph<float> net; // outputs raw feature estimate
    };
    std::vector<Member> members;
    int input_width = 0;
    int input_height = 0;

    std::array<double, radiomics::FeatureVector::kCount> predict(
        const imaging::GrayImage& img) const;
};

/// Validates completeness (all six features exactly once, shared geometry;
/// errors name the missing/duplicated feature) and folds de-normalization.
FinEnsemble assemble_ensemble(const std::vector<FinModel>& fins);

void save_fin(const FinModel& model, const std::filesystem::path& path);
FinModel load_fin(const std::filesystem::path& path);

} // namespace finrad::fin
