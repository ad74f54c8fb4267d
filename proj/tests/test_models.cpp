#include <doctest.h>

#include <cmath>

#include "finrad/adam.hpp"
#include "finrad/errors.hpp"
#include "finrad/gradcheck.hpp"
#include "finrad/loss.hpp"
#include "finrad/models.hpp"
#include "finrad/rng.hpp"

using namespace finrad;
using models::ClassifierConfig;
using models::FinMode;
using models::UnetConfig;

namespace {

fin::FinModel make_fin(const std::string& feature, std::vector<int> hidden,
                       int w, int h, uint64_t seed, double mean, double stddev) {
    neural::GraphBuilder b;
    int node = b.input({w * h});
    for (int width : hidden) {
        node = b.dense(node, width);
        node = b.relu(node);
    }
    b.dense(node, 1);
    fin::FinModel m;
    m.feature_id = feature;
    m.topology.hidden = std::move(hidden);
    m.net = neural::build_network<float>(b.spec, seed);
    m.target_mean = mean;
    m.target_std = stddev;
    m.input_width = w;
    m.input_height = h;
    return m;
}

fin::FinEnsemble make_ensemble(int w, int h, uint64_t seed) {
    std::vector<fin::FinModel> fins;
    for (int i = 0; i < 6; ++i)
        fins.push_back(make_fin(
            radiomics::FeatureVector::names()[static_cast<size_t>(i)], {32},
            w, h, seed + static_cast<uint64_t>(i), 0.3 * i, 1.0 + 0.2 * i));
    return fin::assemble_ensemble(fins);
}

neural::Tensor<float> random_input(Pcg64& rng, std::vector<int> shape) {
    neural::Tensor<float> t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

bool outputs_equal(const neural::Tensor<float>& a, const neural::Tensor<float>& b) {
    if (a.shape != b.shape) return false;
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

int count_conv_channels(const neural::ModelGraph<float>& m, size_t k) {
    // k-th conv node's channel width, in node order.
    size_t seen = 0;
    for (const auto& n : m.spec.nodes) {
        if (n.kind != neural::LayerKind::conv2d) continue;
        if (seen == k) return n.channels;
        ++seen;
    }
    return -1;
}

} // namespace

TEST_SUITE("models") {

TEST_CASE("feature dfnn structure") {
    const auto m = models::build_feature_dfnn({64, 64}, 2, 7);
    CHECK(m.parameter_count() ==
          static_cast<size_t>(6 * 64 + 64 + 64 * 64 + 64 + 64 * 2 + 2));

    neural::Tensor<float> zero({6});
    const auto y = forward(m, zero);
    REQUIRE(y.shape == std::vector<int>{2});
    CHECK(y.data[0] + y.data[1] == doctest::Approx(1.0).epsilon(1e-6));

    const auto m2 = models::build_feature_dfnn({64, 64}, 2, 7);
    for (size_t i = 0; i < m.params.size(); ++i)
        CHECK(m.params[i].data == m2.params[i].data);

    CHECK_THROWS_AS(models::build_feature_dfnn({0}, 2, 7), InvalidArgument);
}

TEST_CASE("cnn classifier structure and geometry errors") {
    ClassifierConfig cfg;
    cfg.input_width = 64;
    cfg.input_height = 64;
    cfg.conv_stages = {8, 16};
    cfg.head = {64};
    const auto m = models::build_cnn_classifier(cfg, 7);
    // conv1 1->8, conv2 8->16, flatten 16*16*16 = 4096, dense 4096->64, 64->2
    const size_t expected = (9 * 8 + 8) + (8 * 9 * 16 + 16) +
                            (4096 * 64 + 64) + (64 * 2 + 2);
    CHECK(m.parameter_count() == expected);

    Pcg64 rng(3);
    const auto y = forward(m, random_input(rng, {1, 64, 64}));
    double total = 0.0;
    for (float v : y.data) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

    ClassifierConfig odd = cfg;
    odd.input_width = 63;
    odd.input_height = 63;
    CHECK_THROWS_AS(models::build_cnn_classifier(odd, 7), ShapeError);
}

TEST_CASE("fin-cnn: embedding, equivalence, and freezing") {
    const int size = 16;
    const auto ens = make_ensemble(size, size, 55);
    ClassifierConfig cfg;
    cfg.input_width = size;
    cfg.input_height = size;
    cfg.conv_stages = {4, 8};
    cfg.head = {16};
    cfg.fin_mode = FinMode::embedded_finetune;

    auto fincnn = models::build_fin_cnn_classifier(cfg, ens, 21);
    Pcg64 rng(5);

    SUBCASE("fin branch reproduces the ensemble at initialization") {
        imaging::GrayImage img(size, size);
        for (auto& v : img.data) v = rng.uniform();
        const auto expected = ens.predict(img);

        neural::Tensor<float> x({1, size, size});
        for (size_t i = 0; i < img.data.size(); ++i)
            x.data[i] = static_cast<float>(img.data[i]);
        neural::ForwardCache<float> cache;
        forward(fincnn.graph, x, &cache);
        // The FIN concat feeds the merged concat's second input.
        int merged = -1;
        for (size_t n = 0; n < fincnn.graph.spec.nodes.size(); ++n)
            if (fincnn.graph.spec.nodes[n].kind == neural::LayerKind::concat)
                merged = static_cast<int>(n);
        const int fin_cat = fincnn.graph.spec.nodes[static_cast<size_t>(merged)].inputs[1];
        const auto& fin_out = cache.outputs[static_cast<size_t>(fin_cat)];
        REQUIRE(fin_out.shape == std::vector<int>{6});
        for (int i = 0; i < 6; ++i)
            CHECK(static_cast<double>(fin_out.data[static_cast<size_t>(i)]) ==
                  expected[static_cast<size_t>(i)]);
    }

    SUBCASE("zeroing FIN rows reduces to the stripped baseline bitwise") {
        models::zero_fin_inputs(fincnn);
        const auto baseline = models::strip_fin_branch(fincnn, cfg);
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = random_input(rng, {1, size, size});
            CHECK(outputs_equal(forward(fincnn.graph, x), forward(baseline, x)));
        }
    }

    SUBCASE("frozen FINs do not move under training steps") {
        ClassifierConfig frozen_cfg = cfg;
        frozen_cfg.fin_mode = FinMode::embedded_frozen;
        auto frozen = models::build_fin_cnn_classifier(frozen_cfg, ens, 23);
        const auto before = frozen.graph.params;
        auto st = neural::AdamState<float>::init(frozen.graph, 1e-2);
        for (int step = 0; step < 10; ++step) {
            const auto x = random_input(rng, {1, size, size});
            neural::ForwardCache<float> cache;
            const auto pred = forward(frozen.graph, x, &cache);
            neural::Tensor<float> target({2});
            target.data[step % 2] = 1.0f;
            const auto [l, g] = neural::loss(neural::LossKind::cross_entropy, pred, target);
            const auto grads = backward(frozen.graph, cache, g);
            adam_step(frozen.graph, grads, st);
        }
        bool conv_moved = false;
        for (int p = 0; p < frozen.n_conv_params; ++p)
            if (frozen.graph.params[static_cast<size_t>(p)].data !=
                before[static_cast<size_t>(p)].data)
                conv_moved = true;
        CHECK(conv_moved);
        for (int p = frozen.n_conv_params;
             p < frozen.n_conv_params + frozen.n_fin_params; ++p)
            CHECK(frozen.graph.params[static_cast<size_t>(p)].data ==
                  before[static_cast<size_t>(p)].data);
    }

    SUBCASE("fin_mode none is rejected") {
        ClassifierConfig none_cfg = cfg;
        none_cfg.fin_mode = FinMode::none;
        CHECK_THROWS_AS(models::build_fin_cnn_classifier(none_cfg, ens, 1),
                        InvalidArgument);
    }

    SUBCASE("geometry mismatch is rejected") {
        ClassifierConfig big = cfg;
        big.input_width = 32;
        big.input_height = 32;
        CHECK_THROWS_AS(models::build_fin_cnn_classifier(big, ens, 1), ShapeError);
    }
}

TEST_CASE("unet structure") {
    UnetConfig cfg;
    cfg.input_width = 128;
    cfg.input_height = 128;
    cfg.base_filters = 8;
    cfg.depth = 4;
    const auto m = models::build_unet(cfg, 31);

    // Encoder ladder 8,16,32,64 with a 128-channel bottleneck.
    CHECK(count_conv_channels(m, 0) == 8);
    CHECK(count_conv_channels(m, 2) == 16);
    CHECK(count_conv_channels(m, 4) == 32);
    CHECK(count_conv_channels(m, 6) == 64);
    CHECK(count_conv_channels(m, 8) == 128);

    Pcg64 rng(7);
    const auto y = forward(m, random_input(rng, {1, 128, 128}));
    CHECK(y.shape == std::vector<int>{1, 128, 128});
    for (float v : y.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }

    UnetConfig bad = cfg;
    bad.input_width = 60;
    bad.input_height = 60;
    CHECK_THROWS_AS(models::build_unet(bad, 31), ShapeError);
}

TEST_CASE("fin-unet: shapes, equivalence") {
    UnetConfig cfg;
    cfg.input_width = 128;
    cfg.input_height = 128;
    cfg.base_filters = 4;
    cfg.depth = 3;
    cfg.grid = 16;
    cfg.fin_mode = FinMode::embedded_finetune;
    const auto ens = make_ensemble(8, 8, 71); // 128/16 = 8x8 patches

    auto finunet = models::build_fin_unet(cfg, ens, 33);

    // Shape arithmetic along the FIN branch: patches 256x64, map 6x16x16,
    // upsampled to 6x64x64, joined with the 4 pooled channels.
    const auto& shapes = finunet.graph.out_shapes;
    bool saw_patch = false, saw_map = false, saw_join = false;
    for (size_t i = 0; i < finunet.graph.spec.nodes.size(); ++i) {
        const auto& n = finunet.graph.spec.nodes[i];
        if (n.kind == neural::LayerKind::patch_split) {
            CHECK(shapes[i] == std::vector<int>{256, 64});
            saw_patch = true;
        }
        if (n.kind == neural::LayerKind::map_from_grid) {
            CHECK(shapes[i] == std::vector<int>{6, 16, 16});
            saw_map = true;
        }
        if (n.kind == neural::LayerKind::concat &&
            shapes[i] == std::vector<int>{10, 64, 64})
            saw_join = true;
    }
    CHECK(saw_patch);
    CHECK(saw_map);
    CHECK(saw_join);

    Pcg64 rng(11);
    SUBCASE("zeroing FIN channels reduces to the stripped baseline bitwise") {
        models::zero_fin_inputs(finunet);
        const auto baseline = models::strip_fin_branch(finunet, cfg);
        for (int trial = 0; trial < 10; ++trial) {
            const auto x = random_input(rng, {1, 128, 128});
            CHECK(outputs_equal(forward(finunet.graph, x), forward(baseline, x)));
        }
    }

    SUBCASE("patch geometry mismatch is rejected") {
        const auto wrong = make_ensemble(4, 4, 77);
        CHECK_THROWS_AS(models::build_fin_unet(cfg, wrong, 1), ShapeError);
    }
}

TEST_CASE("parameter parity report and widening") {
    const auto a = models::build_feature_dfnn({8}, 2, 1);
    const auto b = models::build_feature_dfnn({8}, 2, 2);
    const auto parity = models::parameter_parity({{"a", &a}, {"b", &b}});
    CHECK(parity.spread == 0.0);

    // Ratio-only check with the published-style counts.
    neural::GraphBuilder g1;
    g1.dense(g1.input({1}), 49); // 49*1+49 = 98... construct exact counts instead
    // Simpler: spread arithmetic directly.
    models::ParityReport manual;
    manual.counts = {{"x", 147}, {"y", 150}};
    manual.spread = (150.0 - 147.0) / 147.0;
    CHECK(manual.spread == doctest::Approx(0.0204).epsilon(1e-2));

    CHECK_THROWS_AS(models::parameter_parity({{"a", &a}}), InvalidArgument);

    // Widening reaches the target within 5%.
    const auto ens = make_ensemble(16, 16, 99);
    ClassifierConfig cfg;
    cfg.input_width = 16;
    cfg.input_height = 16;
    cfg.conv_stages = {4, 8};
    cfg.head = {16};
    ClassifierConfig fin_cfg = cfg;
    fin_cfg.fin_mode = FinMode::embedded_finetune;
    const size_t target = models::count_fin_cnn_parameters(fin_cfg, ens);
    const auto head = models::widen_head_for_parity(cfg, target);
    ClassifierConfig widened = cfg;
    widened.head = head;
    const auto wide = models::build_cnn_classifier(widened, 1);
    CHECK(wide.parameter_count() >= target);
    CHECK(static_cast<double>(wide.parameter_count() - target) /
              static_cast<double>(target) <=
          0.05);

    const auto dfnn_widths = models::dfnn_widths_for_parity(2, target);
    const auto dfnn = models::build_feature_dfnn(dfnn_widths, 2, 1);
    CHECK(dfnn.parameter_count() >= target);
    CHECK(static_cast<double>(dfnn.parameter_count() - target) /
              static_cast<double>(target) <=
          0.05);

    UnetConfig ucfg;
    ucfg.input_width = 64;
    ucfg.input_height = 64;
    ucfg.base_filters = 4;
    ucfg.depth = 2;
    const size_t utarget = models::build_unet(ucfg, 1).parameter_count() + 5000;
    const int extra = models::unet_extra_for_parity(ucfg, utarget);
    UnetConfig grown = ucfg;
    grown.bottleneck_extra = extra;
    const auto grown_unet = models::build_unet(grown, 1);
    CHECK(grown_unet.parameter_count() >= utarget);
    CHECK(static_cast<double>(grown_unet.parameter_count() - utarget) /
              static_cast<double>(utarget) <=
          0.05);
}

TEST_CASE("every architecture overfits a 4-sample toy set") {
    // 200 Adam steps at lr 1e-3 must cut the training loss by >= 90%.
    Pcg64 rng(13);
    const int steps = 200;

    auto overfit = [&](neural::ModelGraph<float>& m,
                       const std::vector<neural::Tensor<float>>& xs,
                       const std::vector<neural::Tensor<float>>& ts,
                       neural::LossKind kind) {
        auto st = neural::AdamState<float>::init(m, 1e-3);
        double first = 0.0, last = 0.0;
        for (int step = 0; step < steps; ++step) {
            std::vector<neural::Tensor<float>> grads;
            double total = 0.0;
            for (size_t s = 0; s < xs.size(); ++s) {
                neural::ForwardCache<float> cache;
                const auto pred = forward(m, xs[s], &cache);
                auto [l, g] = neural::loss(kind, pred, ts[s]);
                total += l;
                for (auto& v : g.data) v /= static_cast<float>(xs.size());
                auto sample = backward(m, cache, g);
                if (grads.empty()) grads = std::move(sample);
                else
                    for (size_t t = 0; t < grads.size(); ++t)
                        for (size_t j = 0; j < grads[t].data.size(); ++j)
                            grads[t].data[j] += sample[t].data[j];
            }
            adam_step(m, grads, st);
            if (step == 0) first = total;
            last = total;
        }
        CHECK(last <= 0.1 * first);
    };

    auto class_targets = [](int n, int classes) {
        std::vector<neural::Tensor<float>> ts;
        for (int i = 0; i < n; ++i) {
            neural::Tensor<float> t({classes});
            t.data[static_cast<size_t>(i % classes)] = 1.0f;
            ts.push_back(std::move(t));
        }
        return ts;
    };

    SUBCASE("feature dfnn") {
        auto m = models::build_feature_dfnn({64, 64}, 2, 1);
        std::vector<neural::Tensor<float>> xs;
        for (int i = 0; i < 4; ++i) {
            // z-scored feature scale
            neural::Tensor<float> x({6});
            for (auto& v : x.data)
                v = static_cast<float>(rng.uniform(-1.5, 1.5));
            xs.push_back(std::move(x));
        }
        overfit(m, xs, class_targets(4, 2), neural::LossKind::cross_entropy);
    }
    SUBCASE("cnn") {
        ClassifierConfig cfg;
        cfg.input_width = 16;
        cfg.input_height = 16;
        cfg.conv_stages = {4, 8};
        cfg.head = {16};
        auto m = models::build_cnn_classifier(cfg, 2);
        std::vector<neural::Tensor<float>> xs;
        for (int i = 0; i < 4; ++i) xs.push_back(random_input(rng, {1, 16, 16}));
        overfit(m, xs, class_targets(4, 2), neural::LossKind::cross_entropy);
    }
    SUBCASE("fin cnn") {
        const auto ens = make_ensemble(16, 16, 3);
        ClassifierConfig cfg;
        cfg.input_width = 16;
        cfg.input_height = 16;
        cfg.conv_stages = {4, 8};
        cfg.head = {16};
        cfg.fin_mode = FinMode::embedded_finetune;
        auto m = models::build_fin_cnn_classifier(cfg, ens, 4).graph;
        std::vector<neural::Tensor<float>> xs;
        for (int i = 0; i < 4; ++i) xs.push_back(random_input(rng, {1, 16, 16}));
        overfit(m, xs, class_targets(4, 2), neural::LossKind::cross_entropy);
    }
    SUBCASE("unet") {
        UnetConfig cfg;
        cfg.input_width = 16;
        cfg.input_height = 16;
        cfg.base_filters = 4;
        cfg.depth = 2;
        auto m = models::build_unet(cfg, 5);
        std::vector<neural::Tensor<float>> xs, ts;
        for (int i = 0; i < 4; ++i) {
            xs.push_back(random_input(rng, {1, 16, 16}));
            neural::Tensor<float> t({1, 16, 16});
            for (size_t j = 0; j < t.data.size(); ++j)
                t.data[j] = (j % (static_cast<size_t>(i) + 2)) == 0 ? 1.0f : 0.0f;
            ts.push_back(std::move(t));
        }
        overfit(m, xs, ts, neural::LossKind::bce);
    }
    SUBCASE("fin unet") {
        UnetConfig cfg;
        cfg.input_width = 32;
        cfg.input_height = 32;
        cfg.base_filters = 4;
        cfg.depth = 2;
        cfg.grid = 16;
        cfg.fin_mode = FinMode::embedded_finetune;
        const auto ens = make_ensemble(2, 2, 6);
        auto m = models::build_fin_unet(cfg, ens, 7).graph;
        std::vector<neural::Tensor<float>> xs, ts;
        for (int i = 0; i < 4; ++i) {
            xs.push_back(random_input(rng, {1, 32, 32}));
            neural::Tensor<float> t({1, 32, 32});
            for (size_t j = 0; j < t.data.size(); ++j)
                t.data[j] = (j / 32 < 16) == (i % 2 == 0) ? 1.0f : 0.0f;
            ts.push_back(std::move(t));
        }
        overfit(m, xs, ts, neural::LossKind::bce);
    }
}

TEST_CASE("fin-unet gradient check at desk scale") {
    UnetConfig cfg;
    cfg.input_width = 32;
    cfg.input_height = 32;
    cfg.base_filters = 4;
    cfg.depth = 2;
    cfg.grid = 16;
    cfg.fin_mode = FinMode::embedded_finetune;
    const auto ens = make_ensemble(2, 2, 41);
    const auto m = models::build_fin_unet(cfg, ens, 42);
    const auto md = neural::to_double(m.graph);

    Pcg64 rng(43);
    neural::Tensor<double> x({1, 32, 32});
    for (auto& v : x.data) v = rng.uniform();
    neural::Tensor<double> t({1, 32, 32});
    for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = (i % 5 == 0) ? 1.0 : 0.0;

    // Deep composites: coordinates with near-zero true gradients sit below
    // the central-difference noise floor, so the aggregate error is the
    // correctness gate; per-coordinate agreement is asserted at the floor.
    const auto result =
        neural::grad_check_detail(md, x, t, neural::LossKind::bce, 1e-5, 200);
    CHECK(result.norm_rel <= 1e-6);
    CHECK(result.max_rel <= 1e-3);
}

} // TEST_SUITE
