#pragma once

#include <cstddef>
#include <string>

namespace finrad::kernels {

/// Which implementation family executes the float kernels. Selection happens
/// once at startup from CPU capabilities; tests pin it explicitly. The double
/// kernels always run the scalar reference path (they back the 64-bit
/// gradient checks, where portability matters more than speed).
enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_available(Backend b);
void set_backend(Backend b); // throws InvalidArgument if unavailable
std::string backend_name(Backend b);

// Row-major GEMM family. Accumulating forms; callers pre-fill C (e.g. with a
// broadcast bias) before the call.
//
//   gemm_nn: c[m][n] += a[m][p] * b[p][n]
//   gemm_tn: c[p][n] += a[m][p]^T * b[m][n]
//   gemm_nt: c[m][p] += a[m][n] * b[p][n]^T
void gemm_nn(const float* a, const float* b, float* c, int m, int p, int n);
void gemm_tn(const float* a, const float* b, float* c, int m, int p, int n);
void gemm_nt(const float* a, const float* b, float* c, int m, int p, int n);
void gemm_nn(const double* a, const double* b, double* c, int m, int p, int n);
void gemm_tn(const double* a, const double* b, double* c, int m, int p, int n);
void gemm_nt(const double* a, const double* b, double* c, int m, int p, int n);

// 3x3 convolution, stride 1, over an explicitly zero-padded input:
// in_padded is [cin][(h+2)][(w+2)], weights are [cout][cin][3][3], out is
// [cout][h][w]. out is overwritten with bias (zero if bias == nullptr) before
// accumulation. Backward-data reuses this kernel with flipped, transposed
// weights.
void conv3x3(const float* in_padded, const float* w, const float* bias,
             float* out, int cin, int cout, int h, int wd);
void conv3x3(const double* in_padded, const double* w, const double* bias,
             double* out, int cin, int cout, int h, int wd);

// gw[k][c][3][3] += sum_{y,x} gout[k][y][x] * in_padded[c][y+dy][x+dx]
// gb[k] += sum_{y,x} gout[k][y][x]
void conv3x3_grad_weights(const float* in_padded, const float* gout, float* gw,
                          float* gb, int cin, int cout, int h, int wd);
void conv3x3_grad_weights(const double* in_padded, const double* gout,
                          double* gw, double* gb, int cin, int cout, int h,
                          int wd);

void relu(const float* x, float* y, size_t n);
void relu(const double* x, double* y, size_t n);

// gx[i] = x[i] > 0 ? g[i] : 0
void relu_grad(const float* x, const float* g, float* gx, size_t n);
void relu_grad(const double* x, const double* g, double* gx, size_t n);

// One Adam step over a flat parameter block. c1 = 1/(1-beta1^t),
// c2 = 1/(1-beta2^t) are the bias-correction factors for the current step.
void adam_update(float* p, const float* g, float* m, float* v, size_t n,
                 float lr, float beta1, float beta2, float eps, float c1,
                 float c2);
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps, double c1,
                 double c2);

} // namespace finrad::kernels
