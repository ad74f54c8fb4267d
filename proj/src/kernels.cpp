#include "finrad/kernels.hpp"

#include "finrad/errors.hpp"
#include "kernels_scalar.hpp"
#if FINRAD_HAVE_AVX2_TU
#include "kernels_avx2.hpp"
#endif

namespace finrad::kernels {

namespace {

bool detect_avx2() {
#if FINRAD_HAVE_AVX2_TU
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend& backend_ref() {
    static Backend b = detect_avx2() ? Backend::avx2 : Backend::scalar;
    return b;
}

} // namespace

Backend active_backend() { return backend_ref(); }

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return detect_avx2();
    }
    return false;
}

void set_backend(Backend b) {
    if (!backend_available(b))
        throw InvalidArgument("kernel backend not available on this CPU: " +
                              backend_name(b));
    backend_ref() = b;
}

std::string backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

#if FINRAD_HAVE_AVX2_TU
#define FINRAD_DISPATCH(fn, ...)                          \
    do {                                                  \
        if (backend_ref() == Backend::avx2)               \
            return avx2::fn(__VA_ARGS__);                 \
        return scalar::fn(__VA_ARGS__);                   \
    } while (0)
#else
#define FINRAD_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void gemm_nn(const float* a, const float* b, float* c, int m, int p, int n) {
    FINRAD_DISPATCH(gemm_nn, a, b, c, m, p, n);
}
void gemm_tn(const float* a, const float* b, float* c, int m, int p, int n) {
    FINRAD_DISPATCH(gemm_tn, a, b, c, m, p, n);
}
void gemm_nt(const float* a, const float* b, float* c, int m, int p, int n) {
    FINRAD_DISPATCH(gemm_nt, a, b, c, m, p, n);
}
void conv3x3(const float* in_padded, const float* w, const float* bias,
             float* out, int cin, int cout, int h, int wd) {
    FINRAD_DISPATCH(conv3x3, in_padded, w, bias, out, cin, cout, h, wd);
}
void conv3x3_grad_weights(const float* in_padded, const float* gout, float* gw,
                          float* gb, int cin, int cout, int h, int wd) {
    FINRAD_DISPATCH(conv3x3_grad_weights, in_padded, gout, gw, gb, cin, cout, h, wd);
}
void relu(const float* x, float* y, size_t n) { FINRAD_DISPATCH(relu, x, y, n); }
void relu_grad(const float* x, const float* g, float* gx, size_t n) {
    FINRAD_DISPATCH(relu_grad, x, g, gx, n);
}
void adam_update(float* p, const float* g, float* m, float* v, size_t n,
                 float lr, float beta1, float beta2, float eps, float c1,
                 float c2) {
    FINRAD_DISPATCH(adam_update, p, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
}

#undef FINRAD_DISPATCH

// Double precision always runs the reference path.
void gemm_nn(const double* a, const double* b, double* c, int m, int p, int n) {
    scalar::gemm_nn(a, b, c, m, p, n);
}
void gemm_tn(const double* a, const double* b, double* c, int m, int p, int n) {
    scalar::gemm_tn(a, b, c, m, p, n);
}
void gemm_nt(const double* a, const double* b, double* c, int m, int p, int n) {
    scalar::gemm_nt(a, b, c, m, p, n);
}
void conv3x3(const double* in_padded, const double* w, const double* bias,
             double* out, int cin, int cout, int h, int wd) {
    scalar::conv3x3(in_padded, w, bias, out, cin, cout, h, wd);
}
void conv3x3_grad_weights(const double* in_padded, const double* gout,
                          double* gw, double* gb, int cin, int cout, int h,
                          int wd) {
    scalar::conv3x3_grad_weights(in_padded, gout, gw, gb, cin, cout, h, wd);
}
void relu(const double* x, double* y, size_t n) { scalar::relu(x, y, n); }
void relu_grad(const double* x, const double* g, double* gx, size_t n) {
    scalar::relu_grad(x, g, gx, n);
}
void adam_update(double* p, const double* g, double* m, double* v, size_t n,
                 double lr, double beta1, double beta2, double eps, double c1,
                 double c2) {
    scalar::adam_update(p, g, m, v, n, lr, beta1, beta2, eps, c1, c2);
}

} // namespace finrad::kernels
