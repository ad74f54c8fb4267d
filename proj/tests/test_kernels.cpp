#include <doctest.h>

#include <cmath>
#include <vector>

#include "finrad/kernels.hpp"
#include "finrad/rng.hpp"

using namespace finrad;
using kernels::Backend;

namespace {

std::vector<float> random_vec(Pcg64& rng, size_t n, double lo = -1.0,
                              double hi = 1.0) {
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(lo, hi));
    return v;
}

std::vector<double> widen(const std::vector<float>& v) {
    return {v.begin(), v.end()};
}

// |a - b| <= tol * max(|ref|, 1) elementwise, against the f64 reference.
void check_close(const std::vector<float>& got, const std::vector<double>& ref,
                 double tol) {
    REQUIRE(got.size() == ref.size());
    for (size_t i = 0; i < got.size(); ++i) {
        const double scale = std::max(1.0, std::abs(ref[i]));
        CHECK(std::abs(static_cast<double>(got[i]) - ref[i]) <= tol * scale);
    }
}

struct BackendGuard {
    Backend saved;
    BackendGuard() : saved(kernels::active_backend()) {}
    ~BackendGuard() { kernels::set_backend(saved); }
};

bool has_avx2() { return kernels::backend_available(Backend::avx2); }

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("backend selection") {
    BackendGuard guard;
    CHECK(kernels::backend_available(Backend::scalar));
    kernels::set_backend(Backend::scalar);
    CHECK(kernels::active_backend() == Backend::scalar);
    if (has_avx2()) {
        kernels::set_backend(Backend::avx2);
        CHECK(kernels::active_backend() == Backend::avx2);
        CHECK(kernels::backend_name(Backend::avx2) == "avx2");
    }
}

TEST_CASE("gemm variants agree across backends and precisions") {
    BackendGuard guard;
    Pcg64 rng(101);
    // Sizes cover the 4x16 tile, the row/column tails, and tiny shapes.
    const int cases[][3] = {{1, 7, 1},   {4, 16, 16},  {5, 33, 18},
                            {32, 100, 64}, {3, 257, 40}, {17, 64, 130}};
    for (const auto& c : cases) {
        const int m = c[0], p = c[1], n = c[2];
        const std::vector<float> a = random_vec(rng, static_cast<size_t>(m) * p);
        const std::vector<float> b = random_vec(rng, static_cast<size_t>(p) * n);
        const std::vector<float> c0 = random_vec(rng, static_cast<size_t>(m) * n);

        SUBCASE("") {}
        // gemm_nn
        {
            std::vector<double> ref = widen(c0);
            kernels::gemm_nn(widen(a).data(), widen(b).data(), ref.data(), m, p, n);
            kernels::set_backend(Backend::scalar);
            std::vector<float> cs = c0;
            kernels::gemm_nn(a.data(), b.data(), cs.data(), m, p, n);
            check_close(cs, ref, 1e-4);
            if (has_avx2()) {
                kernels::set_backend(Backend::avx2);
                std::vector<float> cv = c0;
                kernels::gemm_nn(a.data(), b.data(), cv.data(), m, p, n);
                check_close(cv, ref, 1e-4);
            }
        }
        // gemm_tn: c[p x n] += a[m x p]^T b[m x n]
        {
            const std::vector<float> ct = random_vec(rng, static_cast<size_t>(p) * n);
            const std::vector<float> bt = random_vec(rng, static_cast<size_t>(m) * n);
            std::vector<double> ref = widen(ct);
            kernels::gemm_tn(widen(a).data(), widen(bt).data(), ref.data(), m, p, n);
            kernels::set_backend(Backend::scalar);
            std::vector<float> cs = ct;
            kernels::gemm_tn(a.data(), bt.data(), cs.data(), m, p, n);
            check_close(cs, ref, 1e-4);
            if (has_avx2()) {
                kernels::set_backend(Backend::avx2);
                std::vector<float> cv = ct;
                kernels::gemm_tn(a.data(), bt.data(), cv.data(), m, p, n);
                check_close(cv, ref, 1e-4);
            }
        }
        // gemm_nt: c[m x p] += a[m x n] b[p x n]^T
        {
            const std::vector<float> an = random_vec(rng, static_cast<size_t>(m) * n);
            const std::vector<float> bn = random_vec(rng, static_cast<size_t>(p) * n);
            const std::vector<float> cc = random_vec(rng, static_cast<size_t>(m) * p);
            std::vector<double> ref = widen(cc);
            kernels::gemm_nt(widen(an).data(), widen(bn).data(), ref.data(), m, p, n);
            kernels::set_backend(Backend::scalar);
            std::vector<float> cs = cc;
            kernels::gemm_nt(an.data(), bn.data(), cs.data(), m, p, n);
            check_close(cs, ref, 1e-4);
            if (has_avx2()) {
                kernels::set_backend(Backend::avx2);
                std::vector<float> cv = cc;
                kernels::gemm_nt(an.data(), bn.data(), cv.data(), m, p, n);
                check_close(cv, ref, 1e-4);
            }
        }
    }
}

TEST_CASE("conv3x3 agrees across backends") {
    BackendGuard guard;
    Pcg64 rng(103);
    const int cases[][4] = {{1, 1, 3, 3}, {2, 4, 8, 8}, {3, 5, 9, 13}, {8, 16, 16, 10}};
    for (const auto& c : cases) {
        const int cin = c[0], cout = c[1], h = c[2], w = c[3];
        const std::vector<float> in =
            random_vec(rng, static_cast<size_t>(cin) * (h + 2) * (w + 2));
        const std::vector<float> wt =
            random_vec(rng, static_cast<size_t>(cout) * cin * 9);
        const std::vector<float> bias = random_vec(rng, static_cast<size_t>(cout));

        std::vector<double> ref(static_cast<size_t>(cout) * h * w);
        kernels::conv3x3(widen(in).data(), widen(wt).data(), widen(bias).data(),
                         ref.data(), cin, cout, h, w);

        kernels::set_backend(Backend::scalar);
        std::vector<float> outs(ref.size());
        kernels::conv3x3(in.data(), wt.data(), bias.data(), outs.data(), cin, cout,
                         h, w);
        check_close(outs, ref, 1e-4);
        if (has_avx2()) {
            kernels::set_backend(Backend::avx2);
            std::vector<float> outv(ref.size());
            kernels::conv3x3(in.data(), wt.data(), bias.data(), outv.data(), cin,
                             cout, h, w);
            check_close(outv, ref, 1e-4);
        }

        // grad weights
        const std::vector<float> gout = random_vec(rng, ref.size());
        std::vector<double> gw_ref(static_cast<size_t>(cout) * cin * 9);
        std::vector<double> gb_ref(static_cast<size_t>(cout));
        kernels::conv3x3_grad_weights(widen(in).data(), widen(gout).data(),
                                      gw_ref.data(), gb_ref.data(), cin, cout, h, w);
        kernels::set_backend(Backend::scalar);
        std::vector<float> gw_s(gw_ref.size());
        std::vector<float> gb_s(gb_ref.size());
        kernels::conv3x3_grad_weights(in.data(), gout.data(), gw_s.data(),
                                      gb_s.data(), cin, cout, h, w);
        check_close(gw_s, gw_ref, 1e-3);
        check_close(gb_s, gb_ref, 1e-3);
        if (has_avx2()) {
            kernels::set_backend(Backend::avx2);
            std::vector<float> gw_v(gw_ref.size());
            std::vector<float> gb_v(gb_ref.size());
            kernels::conv3x3_grad_weights(in.data(), gout.data(), gw_v.data(),
                                          gb_v.data(), cin, cout, h, w);
            check_close(gw_v, gw_ref, 1e-3);
            check_close(gb_v, gb_ref, 1e-3);
        }
    }
}

TEST_CASE("elementwise kernels are bit-identical across backends") {
    if (!has_avx2()) return;
    BackendGuard guard;
    Pcg64 rng(107);
    for (const size_t n : {size_t{1}, size_t{8}, size_t{9}, size_t{255}, size_t{1024}}) {
        const std::vector<float> x = random_vec(rng, n, -2.0, 2.0);
        const std::vector<float> g = random_vec(rng, n);

        kernels::set_backend(Backend::scalar);
        std::vector<float> ys(n), gs(n);
        kernels::relu(x.data(), ys.data(), n);
        kernels::relu_grad(x.data(), g.data(), gs.data(), n);

        kernels::set_backend(Backend::avx2);
        std::vector<float> yv(n), gv(n);
        kernels::relu(x.data(), yv.data(), n);
        kernels::relu_grad(x.data(), g.data(), gv.data(), n);

        CHECK(ys == yv);
        CHECK(gs == gv);

        // adam_update: mul/add/sqrt/div only, so also exact.
        std::vector<float> p0 = random_vec(rng, n);
        std::vector<float> m0 = random_vec(rng, n, 0.0, 0.1);
        std::vector<float> v0 = random_vec(rng, n, 0.0, 0.1);
        auto ps = p0, ms = m0, vs = v0;
        auto pv = p0, mv = m0, vv = v0;
        kernels::set_backend(Backend::scalar);
        kernels::adam_update(ps.data(), g.data(), ms.data(), vs.data(), n, 1e-3f,
                             0.9f, 0.999f, 1e-8f, 10.0f, 1000.0f);
        kernels::set_backend(Backend::avx2);
        kernels::adam_update(pv.data(), g.data(), mv.data(), vv.data(), n, 1e-3f,
                             0.9f, 0.999f, 1e-8f, 10.0f, 1000.0f);
        CHECK(ps == pv);
        CHECK(ms == mv);
        CHECK(vs == vv);
    }
}

} // TEST_SUITE
