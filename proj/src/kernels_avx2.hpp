#pragma once

#include <cstddef>

// AVX2+FMA float kernels, compiled in their own translation unit with the
// matching -m flags. Only reachable through the dispatch layer after a
// runtime CPU check.

namespace finrad::kernels::avx2 {

void gemm_nn(const float* a, const float* b, float* c, int m, int p, int n);
void gemm_tn(const float* a, const float* b, float* c, int m, int p, int n);
void gemm_nt(const float* a, const float* b, float* c, int m, int p, int n);
void conv3x3(const float* in_padded, const float* w, const float* bias,
             float* out, int cin, int cout, int h, int wd);
void conv3x3_grad_weights(const float* in_padded, const float* gout, float* gw,
                          float* gb, int cin, int cout, int h, int wd);
void relu(const float* x, float* y, size_t n);
void relu_grad(const float* x, const float* g, float* gx, size_t n);
void adam_update(float* p, const float* g, float* m, float* v, size_t n,
                 float lr, float beta1, float beta2, float eps, float c1,
                 float c2);

} // namespace finrad::kernels::avx2
