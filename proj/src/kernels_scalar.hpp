#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

// Scalar reference kernels. These define the semantics the SIMD variants are
// tested against: accumulation order is ascending over the reduction index,
// and every multiply/add is a separately rounded operation (the build
// disables FP contraction).

namespace finrad::kernels::scalar {

template <typename T>
void gemm_nn(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int i = 0; i < m; ++i) {
        T* crow = c + static_cast<size_t>(i) * n;
        const T* arow = a + static_cast<size_t>(i) * p;
        for (int l = 0; l < p; ++l) {
            const T av = arow[l];
            const T* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_tn(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int i = 0; i < p; ++i) {
        T* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < m; ++l) {
            const T av = a[static_cast<size_t>(l) * p + i];
            const T* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
void gemm_nt(const T* a, const T* b, T* c, int m, int p, int n) {
    for (int j = 0; j < p; ++j) {
        const T* brow = b + static_cast<size_t>(j) * n;
        for (int i = 0; i < m; ++i) {
            const T* arow = a + static_cast<size_t>(i) * n;
            T acc = 0;
            for (int l = 0; l < n; ++l) acc += arow[l] * brow[l];
            c[static_cast<size_t>(i) * p + j] += acc;
        }
    }
}

template <typename T>
void conv3x3(const T* in_padded, const T* w, const T* bias, T* out, int cin,
             int cout, int h, int wd) {
    const int pw = wd + 2;
    for (int k = 0; k < cout; ++k) {
        T* oplane = out + static_cast<size_t>(k) * h * wd;
        const T bv = bias ? bias[k] : T(0);
        std::fill(oplane, oplane + static_cast<size_t>(h) * wd, bv);
        for (int c = 0; c < cin; ++c) {
            const T* iplane = in_padded + static_cast<size_t>(c) * (h + 2) * pw;
            const T* wk = w + (static_cast<size_t>(k) * cin + c) * 9;
            for (int y = 0; y < h; ++y) {
                T* orow = oplane + static_cast<size_t>(y) * wd;
                for (int dy = 0; dy < 3; ++dy) {
                    const T* irow = iplane + static_cast<size_t>(y + dy) * pw;
                    for (int dx = 0; dx < 3; ++dx) {
                        const T wv = wk[dy * 3 + dx];
                        for (int x = 0; x < wd; ++x) orow[x] += wv * irow[x + dx];
                    }
                }
            }
        }
    }
}

template <typename T>
void conv3x3_grad_weights(const T* in_padded, const T* gout, T* gw, T* gb,
                          int cin, int cout, int h, int wd) {
    const int pw = wd + 2;
    for (int k = 0; k < cout; ++k) {
        const T* gplane = gout + static_cast<size_t>(k) * h * wd;
        T gbacc = 0;
        for (int i = 0; i < h * wd; ++i) gbacc += gplane[i];
        gb[k] += gbacc;
        for (int c = 0; c < cin; ++c) {
            const T* iplane = in_padded + static_cast<size_t>(c) * (h + 2) * pw;
            T* wk = gw + (static_cast<size_t>(k) * cin + c) * 9;
            for (int dy = 0; dy < 3; ++dy) {
                for (int dx = 0; dx < 3; ++dx) {
                    T acc = 0;
                    for (int y = 0; y < h; ++y) {
                        const T* grow = gplane + static_cast<size_t>(y) * wd;
                        const T* irow =
                            iplane + static_cast<size_t>(y + dy) * pw + dx;
                        for (int x = 0; x < wd; ++x) acc += grow[x] * irow[x];
                    }
                    wk[dy * 3 + dx] += acc;
                }
            }
        }
    }
}

template <typename T>
void relu(const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_grad(const T* x, const T* g, T* gx, size_t n) {
    for (size_t i = 0; i < n; ++i) gx[i] = x[i] > T(0) ? g[i] : T(0);
}

template <typename T>
void adam_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T beta1,
                 T beta2, T eps, T c1, T c2) {
    const T one_minus_b1 = T(1) - beta1;
    const T one_minus_b2 = T(1) - beta2;
    for (size_t i = 0; i < n; ++i) {
        const T gi = g[i];
        m[i] = beta1 * m[i] + one_minus_b1 * gi;
        v[i] = beta2 * v[i] + one_minus_b2 * (gi * gi);
        const T mhat = m[i] * c1;
        const T vhat = v[i] * c2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

} // namespace finrad::kernels::scalar
