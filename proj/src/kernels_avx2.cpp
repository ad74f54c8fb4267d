#include "kernels_avx2.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

// Scalar remainders use std::fma (a single vfmadd here) so a given output
// element gets the same rounding no matter which code path covers it.

namespace finrad::kernels::avx2 {

namespace {

float hsum8(__m256 v) {
    const __m128 lo = _mm256_castps256_ps128(v);
    const __m128 hi = _mm256_extractf128_ps(v, 1);
    __m128 s = _mm_add_ps(lo, hi);
    s = _mm_add_ps(s, _mm_movehl_ps(s, s));
    s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 1));
    return _mm_cvtss_f32(s);
}

} // namespace

// 4x16 register tile; remainders fall back to the plain loops.
void gemm_nn(const float* a, const float* b, float* c, int m, int p, int n) {
    const int n16 = n - (n % 16);
    const int m4 = m - (m % 4);

    for (int i0 = 0; i0 < m4; i0 += 4) {
        const float* a0 = a + static_cast<size_t>(i0) * p;
        const float* a1 = a0 + p;
        const float* a2 = a1 + p;
        const float* a3 = a2 + p;
        for (int j = 0; j < n16; j += 16) {
            float* c0 = c + static_cast<size_t>(i0) * n + j;
            float* c1 = c0 + n;
            float* c2 = c1 + n;
            float* c3 = c2 + n;
            __m256 acc00 = _mm256_loadu_ps(c0);
            __m256 acc01 = _mm256_loadu_ps(c0 + 8);
            __m256 acc10 = _mm256_loadu_ps(c1);
            __m256 acc11 = _mm256_loadu_ps(c1 + 8);
            __m256 acc20 = _mm256_loadu_ps(c2);
            __m256 acc21 = _mm256_loadu_ps(c2 + 8);
            __m256 acc30 = _mm256_loadu_ps(c3);
            __m256 acc31 = _mm256_loadu_ps(c3 + 8);
            const float* brow = b + j;
            for (int l = 0; l < p; ++l, brow += n) {
                const __m256 b0 = _mm256_loadu_ps(brow);
                const __m256 b1 = _mm256_loadu_ps(brow + 8);
                __m256 av = _mm256_broadcast_ss(a0 + l);
                acc00 = _mm256_fmadd_ps(av, b0, acc00);
                acc01 = _mm256_fmadd_ps(av, b1, acc01);
                av = _mm256_broadcast_ss(a1 + l);
                acc10 = _mm256_fmadd_ps(av, b0, acc10);
                acc11 = _mm256_fmadd_ps(av, b1, acc11);
                av = _mm256_broadcast_ss(a2 + l);
                acc20 = _mm256_fmadd_ps(av, b0, acc20);
                acc21 = _mm256_fmadd_ps(av, b1, acc21);
                av = _mm256_broadcast_ss(a3 + l);
                acc30 = _mm256_fmadd_ps(av, b0, acc30);
                acc31 = _mm256_fmadd_ps(av, b1, acc31);
            }
            _mm256_storeu_ps(c0, acc00);
            _mm256_storeu_ps(c0 + 8, acc01);
            _mm256_storeu_ps(c1, acc10);
            _mm256_storeu_ps(c1 + 8, acc11);
            _mm256_storeu_ps(c2, acc20);
            _mm256_storeu_ps(c2 + 8, acc21);
            _mm256_storeu_ps(c3, acc30);
            _mm256_storeu_ps(c3 + 8, acc31);
        }
    }
    // Column tail for the blocked rows.
    if (n16 < n) {
        for (int i = 0; i < m4; ++i) {
            float* crow = c + static_cast<size_t>(i) * n;
            const float* arow = a + static_cast<size_t>(i) * p;
            for (int l = 0; l < p; ++l) {
                const float av = arow[l];
                const float* brow = b + static_cast<size_t>(l) * n;
                for (int j = n16; j < n; ++j)
                    crow[j] = std::fma(av, brow[j], crow[j]);
            }
        }
    }
    // Row tail over all columns.
    for (int i = m4; i < m; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        const float* arow = a + static_cast<size_t>(i) * p;
        for (int l = 0; l < p; ++l) {
            const __m256 av = _mm256_broadcast_ss(arow + l);
            const float* brow = b + static_cast<size_t>(l) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8)
                _mm256_storeu_ps(crow + j,
                                 _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j),
                                                 _mm256_loadu_ps(crow + j)));
            for (; j < n; ++j) crow[j] = std::fma(arow[l], brow[j], crow[j]);
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int p, int n) {
    for (int i = 0; i < p; ++i) {
        float* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < m; ++l) {
            const float av = a[static_cast<size_t>(l) * p + i];
            const __m256 avv = _mm256_set1_ps(av);
            const float* brow = b + static_cast<size_t>(l) * n;
            int j = 0;
            for (; j + 8 <= n; j += 8)
                _mm256_storeu_ps(crow + j,
                                 _mm256_fmadd_ps(avv, _mm256_loadu_ps(brow + j),
                                                 _mm256_loadu_ps(crow + j)));
            for (; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int p, int n) {
    // b rows are streamed once; a rows stay hot across the j loop.
    for (int j = 0; j < p; ++j) {
        const float* brow = b + static_cast<size_t>(j) * n;
        for (int i = 0; i < m; ++i) {
            const float* arow = a + static_cast<size_t>(i) * n;
            __m256 acc = _mm256_setzero_ps();
            int l = 0;
            for (; l + 8 <= n; l += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + l),
                                      _mm256_loadu_ps(brow + l), acc);
            float sum = hsum8(acc);
            for (; l < n; ++l) sum = std::fma(arow[l], brow[l], sum);
            c[static_cast<size_t>(i) * p + j] += sum;
        }
    }
}

void conv3x3(const float* in_padded, const float* w, const float* bias,
             float* out, int cin, int cout, int h, int wd) {
    const int pw = wd + 2;
    const int w8 = wd - (wd % 8);
    for (int k = 0; k < cout; ++k) {
        float* oplane = out + static_cast<size_t>(k) * h * wd;
        const float bv = bias ? bias[k] : 0.0f;
        std::fill(oplane, oplane + static_cast<size_t>(h) * wd, bv);
        for (int c = 0; c < cin; ++c) {
            const float* iplane =
                in_padded + static_cast<size_t>(c) * (h + 2) * pw;
            const float* wk = w + (static_cast<size_t>(k) * cin + c) * 9;
            __m256 wv[9];
            for (int t = 0; t < 9; ++t) wv[t] = _mm256_set1_ps(wk[t]);
            for (int y = 0; y < h; ++y) {
                float* orow = oplane + static_cast<size_t>(y) * wd;
                const float* r0 = iplane + static_cast<size_t>(y) * pw;
                const float* r1 = r0 + pw;
                const float* r2 = r1 + pw;
                int x = 0;
                for (; x < w8; x += 8) {
                    __m256 acc = _mm256_loadu_ps(orow + x);
                    acc = _mm256_fmadd_ps(wv[0], _mm256_loadu_ps(r0 + x), acc);
                    acc = _mm256_fmadd_ps(wv[1], _mm256_loadu_ps(r0 + x + 1), acc);
                    acc = _mm256_fmadd_ps(wv[2], _mm256_loadu_ps(r0 + x + 2), acc);
                    acc = _mm256_fmadd_ps(wv[3], _mm256_loadu_ps(r1 + x), acc);
                    acc = _mm256_fmadd_ps(wv[4], _mm256_loadu_ps(r1 + x + 1), acc);
                    acc = _mm256_fmadd_ps(wv[5], _mm256_loadu_ps(r1 + x + 2), acc);
                    acc = _mm256_fmadd_ps(wv[6], _mm256_loadu_ps(r2 + x), acc);
                    acc = _mm256_fmadd_ps(wv[7], _mm256_loadu_ps(r2 + x + 1), acc);
                    acc = _mm256_fmadd_ps(wv[8], _mm256_loadu_ps(r2 + x + 2), acc);
                    _mm256_storeu_ps(orow + x, acc);
                }
                for (; x < wd; ++x) {
                    float acc = orow[x];
                    for (int dy = 0; dy < 3; ++dy) {
                        const float* irow = iplane + static_cast<size_t>(y + dy) * pw;
                        for (int dx = 0; dx < 3; ++dx)
                            acc = std::fma(wk[dy * 3 + dx], irow[x + dx], acc);
                    }
                    orow[x] = acc;
                }
            }
        }
    }
}

void conv3x3_grad_weights(const float* in_padded, const float* gout, float* gw,
                          float* gb, int cin, int cout, int h, int wd) {
    const int pw = wd + 2;
    const int w8 = wd - (wd % 8);
    for (int k = 0; k < cout; ++k) {
        const float* gplane = gout + static_cast<size_t>(k) * h * wd;
        {
            __m256 acc = _mm256_setzero_ps();
            size_t i = 0;
            const size_t total = static_cast<size_t>(h) * wd;
            for (; i + 8 <= total; i += 8)
                acc = _mm256_add_ps(acc, _mm256_loadu_ps(gplane + i));
            float s = hsum8(acc);
            for (; i < total; ++i) s += gplane[i];
            gb[k] += s;
        }
        for (int c = 0; c < cin; ++c) {
            const float* iplane =
                in_padded + static_cast<size_t>(c) * (h + 2) * pw;
            __m256 acc[9];
            for (auto& v : acc) v = _mm256_setzero_ps();
            float tail[9] = {0};
            for (int y = 0; y < h; ++y) {
                const float* grow = gplane + static_cast<size_t>(y) * wd;
                const float* r0 = iplane + static_cast<size_t>(y) * pw;
                const float* r1 = r0 + pw;
                const float* r2 = r1 + pw;
                int x = 0;
                for (; x < w8; x += 8) {
                    const __m256 gv = _mm256_loadu_ps(grow + x);
                    acc[0] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r0 + x), acc[0]);
                    acc[1] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r0 + x + 1), acc[1]);
                    acc[2] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r0 + x + 2), acc[2]);
                    acc[3] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r1 + x), acc[3]);
                    acc[4] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r1 + x + 1), acc[4]);
                    acc[5] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r1 + x + 2), acc[5]);
                    acc[6] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r2 + x), acc[6]);
                    acc[7] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r2 + x + 1), acc[7]);
                    acc[8] = _mm256_fmadd_ps(gv, _mm256_loadu_ps(r2 + x + 2), acc[8]);
                }
                for (; x < wd; ++x) {
                    const float gv = grow[x];
                    tail[0] += gv * r0[x];
                    tail[1] += gv * r0[x + 1];
                    tail[2] += gv * r0[x + 2];
                    tail[3] += gv * r1[x];
                    tail[4] += gv * r1[x + 1];
                    tail[5] += gv * r1[x + 2];
                    tail[6] += gv * r2[x];
                    tail[7] += gv * r2[x + 1];
                    tail[8] += gv * r2[x + 2];
                }
            }
            float* wk = gw + (static_cast<size_t>(k) * cin + c) * 9;
            for (int t = 0; t < 9; ++t) wk[t] += hsum8(acc[t]) + tail[t];
        }
    }
}

void relu(const float* x, float* y, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

void relu_grad(const float* x, const float* g, float* gx, size_t n) {
    const __m256 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        _mm256_storeu_ps(gx + i, _mm256_and_ps(_mm256_loadu_ps(g + i), mask));
    }
    for (; i < n; ++i) gx[i] = x[i] > 0.0f ? g[i] : 0.0f;
}

void adam_update(float* p, const float* g, float* m, float* v, size_t n,
                 float lr, float beta1, float beta2, float eps, float c1,
                 float c2) {
    // mul/add only (no FMA): keeps results bit-identical to the scalar path.
    const __m256 b1 = _mm256_set1_ps(beta1);
    const __m256 b2 = _mm256_set1_ps(beta2);
    const __m256 omb1 = _mm256_set1_ps(1.0f - beta1);
    const __m256 omb2 = _mm256_set1_ps(1.0f - beta2);
    const __m256 c1v = _mm256_set1_ps(c1);
    const __m256 c2v = _mm256_set1_ps(c2);
    const __m256 epsv = _mm256_set1_ps(eps);
    const __m256 lrv = _mm256_set1_ps(lr);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 gv = _mm256_loadu_ps(g + i);
        __m256 mv = _mm256_loadu_ps(m + i);
        __m256 vv = _mm256_loadu_ps(v + i);
        mv = _mm256_add_ps(_mm256_mul_ps(b1, mv), _mm256_mul_ps(omb1, gv));
        vv = _mm256_add_ps(_mm256_mul_ps(b2, vv),
                           _mm256_mul_ps(omb2, _mm256_mul_ps(gv, gv)));
        _mm256_storeu_ps(m + i, mv);
        _mm256_storeu_ps(v + i, vv);
        const __m256 mhat = _mm256_mul_ps(mv, c1v);
        const __m256 vhat = _mm256_mul_ps(vv, c2v);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(vhat), epsv);
        const __m256 step = _mm256_mul_ps(lrv, _mm256_div_ps(mhat, denom));
        _mm256_storeu_ps(p + i, _mm256_sub_ps(_mm256_loadu_ps(p + i), step));
    }
    for (; i < n; ++i) {
        const float gi = g[i];
        m[i] = beta1 * m[i] + (1.0f - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0f - beta2) * (gi * gi);
        const float mhat = m[i] * c1;
        const float vhat = v[i] * c2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace finrad::kernels::avx2
