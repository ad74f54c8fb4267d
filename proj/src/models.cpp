#include "finrad/models.hpp"

#include <algorithm>
#include <cstring>

#include "finrad/errors.hpp"

namespace finrad::models {

namespace {

using neural::GraphBuilder;
using neural::GraphSpec;
using neural::LayerKind;

void append_conv_stages(GraphBuilder& b, int& node,
                        const std::vector<int>& stages) {
    for (int k : stages) {
        if (k < 1) throw InvalidArgument("classifier: conv stage width must be >= 1");
        node = b.conv2d(node, k);
        node = b.relu(node);
        node = b.maxpool(node);
    }
}

void append_head(GraphBuilder& b, int& node, const std::vector<int>& head,
                 int num_classes) {
    for (int h : head) {
        if (h < 1) throw InvalidArgument("classifier: head width must be >= 1");
        node = b.dense(node, h);
        node = b.relu(node);
    }
    node = b.dense(node, num_classes);
    node = b.softmax(node);
}

GraphSpec make_dfnn_spec(const std::vector<int>& widths, int num_classes) {
    if (num_classes < 2) throw InvalidArgument("dfnn: num_classes must be >= 2");
    GraphBuilder b;
    int node = b.input({radiomics::FeatureVector::kCount});
    for (int w : widths) {
        if (w < 1) throw InvalidArgument("dfnn: widths must be >= 1");
        node = b.dense(node, w);
        node = b.relu(node);
    }
    node = b.dense(node, num_classes);
    b.softmax(node);
    return std::move(b.spec);
}

GraphSpec make_cnn_spec(const ClassifierConfig& cfg) {
    if (cfg.num_classes < 2)
        throw InvalidArgument("classifier: num_classes must be >= 2");
    if (cfg.conv_stages.empty())
        throw InvalidArgument("classifier: at least one conv stage required");
    if (cfg.in_channels != 1 && cfg.in_channels != 3)
        throw InvalidArgument("classifier: in_channels must be 1 or 3");
    GraphBuilder b;
    int node = b.input({cfg.in_channels, cfg.input_height, cfg.input_width});
    append_conv_stages(b, node, cfg.conv_stages);
    node = b.flatten(node);
    append_head(b, node, cfg.head, cfg.num_classes);
    return std::move(b.spec);
}

// Appends one FIN member's dense stack rooted at `from`; returns its output
// node.
int append_fin_member(GraphBuilder& b, int from,
                      const fin::FinEnsemble::Member& member) {
    int node = from;
    for (int width : member.topology.hidden) {
        node = b.dense(node, width);
        node = b.relu(node);
    }
    return b.dense(node, 1);
}

int concat_chain(GraphBuilder& b, const std::vector<int>& nodes) {
    int node = nodes[0];
    for (size_t i = 1; i < nodes.size(); ++i) node = b.concat(node, nodes[i]);
    return node;
}

struct FinCnnSpec {
    GraphSpec spec;
    int head_weight_param;
    int fin_row_begin;
    int n_conv_params;
    int n_fin_params;
};

FinCnnSpec make_fin_cnn_spec(const ClassifierConfig& cfg,
                             const fin::FinEnsemble& ens) {
    if (cfg.fin_mode == FinMode::none)
        throw InvalidArgument("fin classifier: fin_mode must not be none");
    if (cfg.in_channels != 1)
        throw InvalidArgument("fin classifier: FIN branch requires grayscale input");
    if (ens.input_width != cfg.input_width || ens.input_height != cfg.input_height)
        throw ShapeError("fin classifier: ensemble geometry " +
                         std::to_string(ens.input_width) + "x" +
                         std::to_string(ens.input_height) +
                         " does not match input " +
                         std::to_string(cfg.input_width) + "x" +
                         std::to_string(cfg.input_height));

    FinCnnSpec out;
    GraphBuilder b;
    const int in = b.input({1, cfg.input_height, cfg.input_width});

    // CNN branch first so its parameters align with the plain classifier's.
    int node = in;
    append_conv_stages(b, node, cfg.conv_stages);
    const int cnn_flat = b.flatten(node);

    const int img_flat = b.flatten(in);
    std::vector<int> fin_outs;
    int fin_params = 0;
    for (const auto& member : ens.members) {
        fin_outs.push_back(append_fin_member(b, img_flat, member));
        fin_params += 2 * static_cast<int>(member.topology.hidden.size() + 1);
    }
    const int fin_cat = concat_chain(b, fin_outs);

    int merged = b.concat(cnn_flat, fin_cat); // FIN outputs at the tail
    append_head(b, merged, cfg.head, cfg.num_classes);

    out.spec = std::move(b.spec);
    out.n_conv_params = 2 * static_cast<int>(cfg.conv_stages.size());
    out.n_fin_params = fin_params;
    out.head_weight_param = out.n_conv_params + out.n_fin_params;
    const size_t flat_width = neural::infer_shapes(out.spec)[static_cast<size_t>(
        cnn_flat)][0];
    out.fin_row_begin = static_cast<int>(flat_width);
    return out;
}

struct UnetLayout {
    GraphSpec spec;
    int join_weight_param = -1;
    int n_fin_params = 0;
};

UnetLayout make_unet_spec(const UnetConfig& cfg, const fin::FinEnsemble* ens) {
    if (cfg.base_filters < 1)
        throw InvalidArgument("unet: base_filters must be >= 1");
    if (cfg.depth < 2) throw InvalidArgument("unet: depth must be >= 2");
    const int H = cfg.input_height, W = cfg.input_width;
    const int stride_total = 1 << cfg.depth;
    if (H % stride_total != 0 || W % stride_total != 0)
        throw ShapeError("unet: geometry " + std::to_string(W) + "x" +
                         std::to_string(H) + " not divisible by 2^depth = " +
                         std::to_string(stride_total));

    UnetLayout out;
    GraphBuilder b;
    const int in = b.input({1, H, W});
    std::vector<int> skips;

    // Encoder stage 0.
    int node = in;
    node = b.conv2d(node, cfg.base_filters);
    node = b.relu(node);
    node = b.conv2d(node, cfg.base_filters);
    node = b.relu(node);
    skips.push_back(node);
    node = b.maxpool(node);

    if (ens) {
        if (H % (2 * cfg.grid) != 0 || W % (2 * cfg.grid) != 0)
            throw ShapeError("fin unet: geometry must be divisible by twice the "
                             "grid");
        const int patch_w = W / cfg.grid;
        const int patch_h = H / cfg.grid;
        if (ens->input_width != patch_w || ens->input_height != patch_h)
            throw ShapeError("fin unet: ensemble expects " +
                             std::to_string(ens->input_width) + "x" +
                             std::to_string(ens->input_height) +
                             " patches, grid yields " + std::to_string(patch_w) +
                             "x" + std::to_string(patch_h));

        const int ps = b.patch_split(in, cfg.grid, cfg.grid);
        std::vector<int> fin_outs;
        for (const auto& member : ens->members) {
            fin_outs.push_back(append_fin_member(b, ps, member));
            out.n_fin_params +=
                2 * static_cast<int>(member.topology.hidden.size() + 1);
        }
        const int fin_cat = concat_chain(b, fin_outs);
        const int fmap = b.map_from_grid(fin_cat, cfg.grid, cfg.grid);
        const int factor = (H / 2) / cfg.grid;
        const int fup = factor > 1 ? b.upsample(fmap, factor) : fmap;
        node = b.concat(node, fup); // FIN channels appended after the pooled ones
        out.join_weight_param = 4 + out.n_fin_params;
    }

    // Encoder stages 1..depth-1.
    for (int s = 1; s < cfg.depth; ++s) {
        const int ch = cfg.base_filters << s;
        node = b.conv2d(node, ch);
        node = b.relu(node);
        node = b.conv2d(node, ch);
        node = b.relu(node);
        skips.push_back(node);
        node = b.maxpool(node);
    }

    // Bottleneck; the first conv may be widened for parameter parity.
    const int bottleneck = cfg.base_filters << cfg.depth;
    node = b.conv2d(node, bottleneck + cfg.bottleneck_extra);
    node = b.relu(node);
    node = b.conv2d(node, bottleneck);
    node = b.relu(node);

    // Decoder.
    for (int s = cfg.depth - 1; s >= 0; --s) {
        const int ch = cfg.base_filters << s;
        node = b.upsample(node, 2);
        node = b.concat(node, skips[static_cast<size_t>(s)]);
        node = b.conv2d(node, ch);
        node = b.relu(node);
        node = b.conv2d(node, ch);
        node = b.relu(node);
    }
    node = b.conv2d(node, 1);
    b.sigmoid(node);

    out.spec = std::move(b.spec);
    return out;
}

void copy_fin_weights(neural::ModelGraph<float>& graph, int first_param,
                      const fin::FinEnsemble& ens, FinMode mode) {
    size_t p = static_cast<size_t>(first_param);
    for (const auto& member : ens.members) {
        for (const auto& t : member.net.params) {
            if (graph.params[p].shape != t.shape)
                throw ShapeError("fin embedding: parameter shape mismatch");
            graph.params[p].data = t.data;
            if (mode == FinMode::embedded_frozen) graph.trainable[p] = 0;
            ++p;
        }
    }
}

} // namespace

std::string fin_mode_name(FinMode m) {
    switch (m) {
        case FinMode::none: return "none";
        case FinMode::embedded_finetune: return "embedded-finetune";
        case FinMode::embedded_frozen: return "embedded-frozen";
    }
    return "?";
}

FinMode fin_mode_from_name(const std::string& name) {
    if (name == "none") return FinMode::none;
    if (name == "embedded-finetune") return FinMode::embedded_finetune;
    if (name == "embedded-frozen") return FinMode::embedded_frozen;
    throw InvalidArgument("unknown fin mode: " + name);
}

neural::ModelGraph<float> build_feature_dfnn(const std::vector<int>& widths,
                                             int num_classes, uint64_t seed) {
    return neural::build_network<float>(make_dfnn_spec(widths, num_classes), seed);
}

neural::ModelGraph<float> build_cnn_classifier(const ClassifierConfig& cfg,
                                               uint64_t seed) {
    return neural::build_network<float>(make_cnn_spec(cfg), seed);
}

FinCnnModel build_fin_cnn_classifier(const ClassifierConfig& cfg,
                                     const fin::FinEnsemble& ensemble,
                                     uint64_t seed) {
    FinCnnSpec layout = make_fin_cnn_spec(cfg, ensemble);
    FinCnnModel model;
    model.graph = neural::build_network<float>(layout.spec, seed);
    model.head_weight_param = layout.head_weight_param;
    model.fin_row_begin = layout.fin_row_begin;
    model.n_conv_params = layout.n_conv_params;
    model.n_fin_params = layout.n_fin_params;
    copy_fin_weights(model.graph, model.n_conv_params, ensemble, cfg.fin_mode);
    return model;
}

neural::ModelGraph<float> build_unet(const UnetConfig& cfg, uint64_t seed) {
    return neural::build_network<float>(make_unet_spec(cfg, nullptr).spec, seed);
}

FinUnetModel build_fin_unet(const UnetConfig& cfg,
                            const fin::FinEnsemble& ensemble, uint64_t seed) {
    if (cfg.fin_mode == FinMode::none)
        throw InvalidArgument("fin unet: fin_mode must not be none");
    UnetLayout layout = make_unet_spec(cfg, &ensemble);
    FinUnetModel model;
    model.graph = neural::build_network<float>(layout.spec, seed);
    model.join_weight_param = layout.join_weight_param;
    model.fin_channel_begin = cfg.base_filters;
    model.n_fin_params = layout.n_fin_params;
    copy_fin_weights(model.graph, model.stage0_params, ensemble, cfg.fin_mode);
    return model;
}

ParityReport parameter_parity(
    const std::vector<std::pair<std::string, const neural::ModelGraph<float>*>>&
        models) {
    if (models.size() < 2)
        throw InvalidArgument("parameter_parity: need at least two models");
    ParityReport report;
    size_t mn = SIZE_MAX, mx = 0;
    for (const auto& [name, graph] : models) {
        const size_t count = graph->parameter_count();
        report.counts.emplace_back(name, count);
        mn = std::min(mn, count);
        mx = std::max(mx, count);
    }
    report.spread = static_cast<double>(mx - mn) / static_cast<double>(mn);
    return report;
}

size_t count_parameters(const neural::GraphSpec& spec) {
    const auto shapes = neural::infer_shapes(spec);
    size_t total = 0;
    for (size_t i = 0; i < spec.nodes.size(); ++i) {
        const auto& n = spec.nodes[i];
        if (n.kind == LayerKind::dense) {
            const int fan_in = shapes[static_cast<size_t>(n.inputs[0])].back();
            total += static_cast<size_t>(fan_in) * n.units + n.units;
        } else if (n.kind == LayerKind::conv2d) {
            const int cin = shapes[static_cast<size_t>(n.inputs[0])][0];
            total += static_cast<size_t>(cin) * 9 * n.channels + n.channels;
        }
    }
    return total;
}

size_t count_fin_cnn_parameters(const ClassifierConfig& cfg,
                                const fin::FinEnsemble& ensemble) {
    return count_parameters(make_fin_cnn_spec(cfg, ensemble).spec);
}

size_t count_fin_unet_parameters(const UnetConfig& cfg,
                                 const fin::FinEnsemble& ensemble) {
    return count_parameters(make_unet_spec(cfg, &ensemble).spec);
}

std::vector<int> widen_head_for_parity(const ClassifierConfig& cfg, size_t target) {
    if (cfg.head.empty())
        throw InvalidArgument("widen_head_for_parity: head must be non-empty");
    auto count_with = [&](int h0) {
        ClassifierConfig c = cfg;
        c.fin_mode = FinMode::none;
        c.head[0] = h0;
        return count_parameters(make_cnn_spec(c));
    };
    int lo = cfg.head[0], hi = cfg.head[0];
    while (count_with(hi) < target) {
        lo = hi;
        hi *= 2;
        if (hi > (1 << 22))
            throw InvalidArgument("widen_head_for_parity: target out of reach");
    }
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (count_with(mid) < target) lo = mid + 1;
        else hi = mid;
    }
    std::vector<int> head = cfg.head;
    head[0] = lo;
    return head;
}

std::vector<int> dfnn_widths_for_parity(int num_classes, size_t target) {
    auto count_with = [&](int h) {
        return count_parameters(make_dfnn_spec({h, h}, num_classes));
    };
    int lo = 1, hi = 1;
    while (count_with(hi) < target) {
        lo = hi;
        hi *= 2;
        if (hi > (1 << 18))
            throw InvalidArgument("dfnn_widths_for_parity: target out of reach");
    }
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (count_with(mid) < target) lo = mid + 1;
        else hi = mid;
    }
    return {lo, lo};
}

int unet_extra_for_parity(const UnetConfig& cfg, size_t target) {
    auto count_with = [&](int extra) {
        UnetConfig c = cfg;
        c.fin_mode = FinMode::none;
        c.bottleneck_extra = extra;
        return count_parameters(make_unet_spec(c, nullptr).spec);
    };
    if (count_with(0) >= target) return 0;
    int lo = 0, hi = 1;
    while (count_with(hi) < target) {
        lo = hi;
        hi *= 2;
        if (hi > (1 << 16))
            throw InvalidArgument("unet_extra_for_parity: target out of reach");
    }
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (count_with(mid) < target) lo = mid + 1;
        else hi = mid;
    }
    return lo;
}

void zero_fin_inputs(FinCnnModel& model) {
    neural::Tensor<float>& w =
        model.graph.params[static_cast<size_t>(model.head_weight_param)];
    const int units = w.shape[1];
    for (int row = model.fin_row_begin; row < w.shape[0]; ++row)
        std::fill_n(w.data.begin() + static_cast<size_t>(row) * units, units, 0.0f);
}

void zero_fin_inputs(FinUnetModel& model) {
    neural::Tensor<float>& w =
        model.graph.params[static_cast<size_t>(model.join_weight_param)];
    const int cout = w.shape[0];
    const int cin = w.shape[1];
    for (int k = 0; k < cout; ++k)
        for (int c = model.fin_channel_begin; c < cin; ++c)
            std::fill_n(w.data.begin() + (static_cast<size_t>(k) * cin + c) * 9, 9,
                        0.0f);
}

neural::ModelGraph<float> strip_fin_branch(const FinCnnModel& model,
                                           const ClassifierConfig& cfg) {
    ClassifierConfig base_cfg = cfg;
    base_cfg.fin_mode = FinMode::none;
    neural::ModelGraph<float> base = build_cnn_classifier(base_cfg, model.graph.seed);

    // conv stages are 1:1; the first head dense drops the FIN rows; the rest
    // follow shifted by the FIN parameter block.
    for (int p = 0; p < model.n_conv_params; ++p)
        base.params[static_cast<size_t>(p)] = model.graph.params[static_cast<size_t>(p)];

    const size_t head_src = static_cast<size_t>(model.head_weight_param);
    const size_t head_dst = static_cast<size_t>(model.n_conv_params);
    const neural::Tensor<float>& src_w = model.graph.params[head_src];
    neural::Tensor<float>& dst_w = base.params[head_dst];
    const int units = src_w.shape[1];
    std::copy_n(src_w.data.begin(),
                static_cast<size_t>(model.fin_row_begin) * units,
                dst_w.data.begin());
    for (size_t p = head_src + 1; p < model.graph.params.size(); ++p)
        base.params[head_dst + (p - head_src)] = model.graph.params[p];
    return base;
}

neural::ModelGraph<float> strip_fin_branch(const FinUnetModel& model,
                                           const UnetConfig& cfg) {
    UnetConfig base_cfg = cfg;
    base_cfg.fin_mode = FinMode::none;
    neural::ModelGraph<float> base = build_unet(base_cfg, model.graph.seed);

    for (int p = 0; p < model.stage0_params; ++p)
        base.params[static_cast<size_t>(p)] = model.graph.params[static_cast<size_t>(p)];

    const size_t join_src = static_cast<size_t>(model.join_weight_param);
    const size_t join_dst = static_cast<size_t>(model.stage0_params);
    const neural::Tensor<float>& src_w = model.graph.params[join_src];
    neural::Tensor<float>& dst_w = base.params[join_dst];
    const int cout = src_w.shape[0];
    const int cin_src = src_w.shape[1];
    const int cin_dst = dst_w.shape[1];
    for (int k = 0; k < cout; ++k)
        std::copy_n(src_w.data.begin() + static_cast<size_t>(k) * cin_src * 9,
                    static_cast<size_t>(cin_dst) * 9,
                    dst_w.data.begin() + static_cast<size_t>(k) * cin_dst * 9);
    for (size_t p = join_src + 1; p < model.graph.params.size(); ++p)
        base.params[join_dst + (p - join_src)] = model.graph.params[p];
    return base;
}

} // namespace finrad::models
