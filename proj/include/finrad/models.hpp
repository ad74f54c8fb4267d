#pragma once

#include <string>
#include <utility>
#include <vector>

#include "finrad/fin.hpp"
#include "finrad/net.hpp"

namespace finrad::models {

enum class FinMode { none, embedded_finetune, embedded_frozen };

std::string fin_mode_name(FinMode m);
FinMode fin_mode_from_name(const std::string& name);

struct ClassifierConfig {
    int input_width = 64;
    int input_height = 64;
    int in_channels = 1; // 3 replicates the gray plane (RGB-input variant)
    int num_classes = 2;
    std::vector<int> conv_stages = {8, 16};
    std::vector<int> head = {64};
    FinMode fin_mode = FinMode::none;
};

struct UnetConfig {
    int input_width = 128;
    int input_height = 128;
    int base_filters = 8;
    int depth = 4;
    int grid = 16;            // patch grid feeding the FIN branch
    int bottleneck_extra = 0; // parity widening of the first bottleneck conv
    FinMode fin_mode = FinMode::none;
};

/// Dense stack on the six-feature vector: 6 -> widths (ReLU) -> classes ->
/// softmax.
neural::ModelGraph<float> build_feature_dfnn(const std::vector<int>& widths,
                                             int num_classes, uint64_t seed);

/// conv/relu/maxpool stages -> flatten -> dense head -> softmax.
neural::ModelGraph<float> build_cnn_classifier(const ClassifierConfig& cfg,
                                               uint64_t seed);

/// FIN-embedded classifier: the CNN branch and a six-FIN branch (weights
/// copied from the pretrained ensemble) concatenated before the dense head,
/// FIN outputs occupying the tail of the merged vector.
struct FinCnnModel {
    neural::ModelGraph<float> graph;
    int head_weight_param = -1; // first head dense weight tensor
    int fin_row_begin = 0;      // merged-vector offset of the FIN outputs
    int n_conv_params = 0;
    int n_fin_params = 0;
};

FinCnnModel build_fin_cnn_classifier(const ClassifierConfig& cfg,
                                     const fin::FinEnsemble& ensemble,
                                     uint64_t seed);

/// Encoder/decoder with skip connections; channels double per stage from
/// base_filters; nearest-neighbor upsampling; sigmoid single-channel output.
neural::ModelGraph<float> build_unet(const UnetConfig& cfg, uint64_t seed);

/// U-net with the FIN ensemble applied patch-wise over the grid, the
/// resulting coarse feature map upsampled to the post-first-maxpool
/// resolution and concatenated as six extra channels (placed last).
struct FinUnetModel {
    neural::ModelGraph<float> graph;
    int join_weight_param = -1; // first stage-1 conv weight (reads FIN channels)
    int fin_channel_begin = 0;
    int stage0_params = 4;
    int n_fin_params = 0;
};

FinUnetModel build_fin_unet(const UnetConfig& cfg,
                            const fin::FinEnsemble& ensemble, uint64_t seed);

struct ParityReport {
    std::vector<std::pair<std::string, size_t>> counts;
    double spread = 0.0; // (max - min) / min
};

ParityReport parameter_parity(
    const std::vector<std::pair<std::string, const neural::ModelGraph<float>*>>&
        models);

/// Total parameter count of a graph description, without building it.
size_t count_parameters(const neural::GraphSpec& spec);

size_t count_fin_cnn_parameters(const ClassifierConfig& cfg,
                                const fin::FinEnsemble& ensemble);
size_t count_fin_unet_parameters(const UnetConfig& cfg,
                                 const fin::FinEnsemble& ensemble);

/// Parity is reached by growing the baseline, never by shrinking the FIN
/// model: these return the smallest widening whose parameter count reaches
/// the target.
std::vector<int> widen_head_for_parity(const ClassifierConfig& cfg, size_t target);
std::vector<int> dfnn_widths_for_parity(int num_classes, size_t target);
int unet_extra_for_parity(const UnetConfig& cfg, size_t target);

/// Structural-equivalence support: zero the parameters that read FIN
/// outputs, or build the baseline that shares every remaining weight.
void zero_fin_inputs(FinCnnModel& model);
void zero_fin_inputs(FinUnetModel& model);
neural::ModelGraph<float> strip_fin_branch(const FinCnnModel& model,
                                           const ClassifierConfig& cfg);
neural::ModelGraph<float> strip_fin_branch(const FinUnetModel& model,
                                           const UnetConfig& cfg);

} // namespace finrad::models
