#include "finrad/net.hpp"

#include <algorithm>
#include <cmath>

#include "finrad/errors.hpp"
#include "finrad/kernels.hpp"
#include "finrad/rng.hpp"

namespace finrad::neural {

namespace {

std::string node_label(const GraphSpec& spec, int i) {
    return "node " + std::to_string(i) + " (" +
           kind_name(spec.nodes[static_cast<size_t>(i)].kind) + ")";
}

} // namespace

std::string kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::input: return "input";
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::maxpool2d: return "maxpool2d";
        case LayerKind::relu: return "relu";
        case LayerKind::sigmoid: return "sigmoid";
        case LayerKind::softmax: return "softmax";
        case LayerKind::flatten: return "flatten";
        case LayerKind::concat: return "concat";
        case LayerKind::upsample_nearest: return "upsample_nearest";
        case LayerKind::patch_split: return "patch_split";
        case LayerKind::map_from_grid: return "map_from_grid";
    }
    return "?";
}

LayerKind kind_from_name(const std::string& name) {
    static const std::pair<const char*, LayerKind> table[] = {
        {"input", LayerKind::input},
        {"dense", LayerKind::dense},
        {"conv2d", LayerKind::conv2d},
        {"maxpool2d", LayerKind::maxpool2d},
        {"relu", LayerKind::relu},
        {"sigmoid", LayerKind::sigmoid},
        {"softmax", LayerKind::softmax},
        {"flatten", LayerKind::flatten},
        {"concat", LayerKind::concat},
        {"upsample_nearest", LayerKind::upsample_nearest},
        {"patch_split", LayerKind::patch_split},
        {"map_from_grid", LayerKind::map_from_grid},
    };
    for (const auto& [n, k] : table)
        if (name == n) return k;
    throw GraphError("unknown layer kind: " + name);
}

// ------------------------------------------------------------- GraphBuilder

namespace {
int push_node(GraphSpec& spec, LayerSpec node) {
    spec.nodes.push_back(std::move(node));
    return static_cast<int>(spec.nodes.size()) - 1;
}
} // namespace

int GraphBuilder::input(std::vector<int> shape) {
    LayerSpec n;
    n.kind = LayerKind::input;
    n.shape = std::move(shape);
    return push_node(spec, std::move(n));
}
int GraphBuilder::dense(int from, int units) {
    LayerSpec n;
    n.kind = LayerKind::dense;
    n.inputs = {from};
    n.units = units;
    return push_node(spec, std::move(n));
}
int GraphBuilder::conv2d(int from, int channels) {
    LayerSpec n;
    n.kind = LayerKind::conv2d;
    n.inputs = {from};
    n.channels = channels;
    return push_node(spec, std::move(n));
}
int GraphBuilder::maxpool(int from) {
    LayerSpec n;
    n.kind = LayerKind::maxpool2d;
    n.inputs = {from};
    return push_node(spec, std::move(n));
}
int GraphBuilder::relu(int from) {
    LayerSpec n;
    n.kind = LayerKind::relu;
    n.inputs = {from};
    return push_node(spec, std::move(n));
}
int GraphBuilder::sigmoid(int from) {
    LayerSpec n;
    n.kind = LayerKind::sigmoid;
    n.inputs = {from};
    return push_node(spec, std::move(n));
}
int GraphBuilder::softmax(int from) {
    LayerSpec n;
    n.kind = LayerKind::softmax;
    n.inputs = {from};
    return push_node(spec, std::move(n));
}
int GraphBuilder::flatten(int from) {
    LayerSpec n;
    n.kind = LayerKind::flatten;
    n.inputs = {from};
    return push_node(spec, std::move(n));
}
int GraphBuilder::concat(int a, int b) {
    LayerSpec n;
    n.kind = LayerKind::concat;
    n.inputs = {a, b};
    return push_node(spec, std::move(n));
}
int GraphBuilder::upsample(int from, int factor) {
    LayerSpec n;
    n.kind = LayerKind::upsample_nearest;
    n.inputs = {from};
    n.factor = factor;
    return push_node(spec, std::move(n));
}
int GraphBuilder::patch_split(int from, int rows, int cols) {
    LayerSpec n;
    n.kind = LayerKind::patch_split;
    n.inputs = {from};
    n.rows = rows;
    n.cols = cols;
    return push_node(spec, std::move(n));
}
int GraphBuilder::map_from_grid(int from, int rows, int cols) {
    LayerSpec n;
    n.kind = LayerKind::map_from_grid;
    n.inputs = {from};
    n.rows = rows;
    n.cols = cols;
    return push_node(spec, std::move(n));
}

// ------------------------------------------------------------ shape inference

std::vector<std::vector<int>> infer_shapes(const GraphSpec& spec) {
    if (spec.nodes.empty()) throw GraphError("empty graph");
    if (spec.nodes[0].kind != LayerKind::input)
        throw GraphError("node 0 must be the input node");
    if (spec.nodes[0].shape.empty())
        throw GraphError("input node must declare a shape");
    shape_numel(spec.nodes[0].shape); // validates positivity

    std::vector<std::vector<int>> shapes(spec.nodes.size());
    shapes[0] = spec.nodes[0].shape;

    for (size_t i = 1; i < spec.nodes.size(); ++i) {
        const LayerSpec& n = spec.nodes[i];
        const std::string label = node_label(spec, static_cast<int>(i));
        if (n.kind == LayerKind::input)
            throw GraphError(label + ": only node 0 may be an input");

        const size_t want_inputs = n.kind == LayerKind::concat ? 2 : 1;
        if (n.inputs.size() != want_inputs)
            throw GraphError(label + ": expects " + std::to_string(want_inputs) +
                             " input(s), has " + std::to_string(n.inputs.size()));
        for (int src : n.inputs) {
            if (src < 0 || static_cast<size_t>(src) >= i)
                throw GraphError(label + ": input " + std::to_string(src) +
                                 " is not an earlier node (cycle or dangling "
                                 "reference)");
        }

        const std::vector<int>& in = shapes[static_cast<size_t>(n.inputs[0])];
        switch (n.kind) {
            case LayerKind::dense: {
                if (n.units < 1) throw GraphError(label + ": units must be >= 1");
                if (in.size() == 1) shapes[i] = {n.units};
                else if (in.size() == 2) shapes[i] = {in[0], n.units};
                else
                    throw ShapeError(label + ": dense input must be rank 1 or 2, got " +
                                     shape_str(in));
                break;
            }
            case LayerKind::conv2d: {
                if (n.channels < 1)
                    throw GraphError(label + ": channels must be >= 1");
                if (in.size() != 3)
                    throw ShapeError(label + ": conv2d input must be [c,h,w], got " +
                                     shape_str(in));
                shapes[i] = {n.channels, in[1], in[2]};
                break;
            }
            case LayerKind::maxpool2d: {
                if (in.size() != 3)
                    throw ShapeError(label + ": maxpool2d input must be [c,h,w], got " +
                                     shape_str(in));
                if (in[1] % 2 != 0 || in[2] % 2 != 0)
                    throw ShapeError(label + ": maxpool2d needs even geometry, got " +
                                     shape_str(in));
                shapes[i] = {in[0], in[1] / 2, in[2] / 2};
                break;
            }
            case LayerKind::relu:
            case LayerKind::sigmoid:
                shapes[i] = in;
                break;
            case LayerKind::softmax: {
                if (in.size() != 1)
                    throw ShapeError(label + ": softmax input must be rank 1, got " +
                                     shape_str(in));
                shapes[i] = in;
                break;
            }
            case LayerKind::flatten:
                shapes[i] = {static_cast<int>(shape_numel(in))};
                break;
            case LayerKind::concat: {
                const std::vector<int>& in2 = shapes[static_cast<size_t>(n.inputs[1])];
                if (in.size() != in2.size())
                    throw ShapeError(label + ": concat rank mismatch " +
                                     shape_str(in) + " vs " + shape_str(in2));
                if (in.size() == 1) {
                    shapes[i] = {in[0] + in2[0]};
                } else if (in.size() == 2) {
                    if (in[0] != in2[0])
                        throw ShapeError(label + ": concat row mismatch " +
                                         shape_str(in) + " vs " + shape_str(in2));
                    shapes[i] = {in[0], in[1] + in2[1]};
                } else if (in.size() == 3) {
                    if (in[1] != in2[1] || in[2] != in2[2])
                        throw ShapeError(label + ": concat spatial mismatch " +
                                         shape_str(in) + " vs " + shape_str(in2));
                    shapes[i] = {in[0] + in2[0], in[1], in[2]};
                } else {
                    throw ShapeError(label + ": concat supports rank 1-3 inputs");
                }
                break;
            }
            case LayerKind::upsample_nearest: {
                if (n.factor < 1) throw GraphError(label + ": factor must be >= 1");
                if (in.size() != 3)
                    throw ShapeError(label + ": upsample input must be [c,h,w], got " +
                                     shape_str(in));
                shapes[i] = {in[0], in[1] * n.factor, in[2] * n.factor};
                break;
            }
            case LayerKind::patch_split: {
                if (n.rows < 1 || n.cols < 1)
                    throw GraphError(label + ": grid must be positive");
                if (in.size() != 3 || in[0] != 1)
                    throw ShapeError(label +
                                     ": patch_split input must be [1,h,w], got " +
                                     shape_str(in));
                if (in[1] % n.rows != 0 || in[2] % n.cols != 0)
                    throw ShapeError(label + ": geometry " + shape_str(in) +
                                     " not divisible by grid " +
                                     std::to_string(n.rows) + "x" +
                                     std::to_string(n.cols));
                shapes[i] = {n.rows * n.cols, (in[1] / n.rows) * (in[2] / n.cols)};
                break;
            }
            case LayerKind::map_from_grid: {
                if (n.rows < 1 || n.cols < 1)
                    throw GraphError(label + ": grid must be positive");
                if (in.size() != 2 || in[0] != n.rows * n.cols)
                    throw ShapeError(label +
                                     ": map_from_grid input must be [rows*cols,f], got " +
                                     shape_str(in));
                shapes[i] = {in[1], n.rows, n.cols};
                break;
            }
            case LayerKind::input:
                break; // unreachable
        }
    }
    return shapes;
}

// ------------------------------------------------------------------- build

template <typename T>
size_t ModelGraph<T>::parameter_count() const {
    size_t n = 0;
    for (const auto& p : params) n += p.numel();
    return n;
}

template <typename T>
ModelGraph<T> build_network(const GraphSpec& spec, uint64_t seed) {
    ModelGraph<T> m;
    m.spec = spec;
    m.seed = seed;
    m.out_shapes = infer_shapes(spec);
    m.weight_param.assign(spec.nodes.size(), -1);

    Pcg64 rng = derive_rng(seed, rng_domain::weight_init, 0);
    for (size_t i = 0; i < spec.nodes.size(); ++i) {
        const LayerSpec& n = spec.nodes[i];
        if (n.kind == LayerKind::dense) {
            const std::vector<int>& in = m.out_shapes[static_cast<size_t>(n.inputs[0])];
            const int fan_in = in.back();
            Tensor<T> w({fan_in, n.units});
            const double limit = std::sqrt(6.0 / fan_in);
            for (auto& v : w.data)
                v = static_cast<T>(rng.uniform(-limit, limit));
            m.weight_param[i] = static_cast<int>(m.params.size());
            m.params.push_back(std::move(w));
            m.params.emplace_back(std::vector<int>{n.units});
        } else if (n.kind == LayerKind::conv2d) {
            const std::vector<int>& in = m.out_shapes[static_cast<size_t>(n.inputs[0])];
            const int cin = in[0];
            Tensor<T> w({n.channels, cin, 3, 3});
            const double limit = std::sqrt(6.0 / (cin * 9.0));
            for (auto& v : w.data)
                v = static_cast<T>(rng.uniform(-limit, limit));
            m.weight_param[i] = static_cast<int>(m.params.size());
            m.params.push_back(std::move(w));
            m.params.emplace_back(std::vector<int>{n.channels});
        }
    }
    m.trainable.assign(m.params.size(), 1);
    return m;
}

// ----------------------------------------------------------------- forward

namespace {

template <typename T>
void pad_plane(const T* src, T* dst, int h, int w) {
    const int pw = w + 2;
    std::fill(dst, dst + pw, T(0));
    for (int y = 0; y < h; ++y) {
        T* row = dst + static_cast<size_t>(y + 1) * pw;
        row[0] = T(0);
        std::copy(src + static_cast<size_t>(y) * w,
                  src + static_cast<size_t>(y + 1) * w, row + 1);
        row[w + 1] = T(0);
    }
    std::fill(dst + static_cast<size_t>(h + 1) * pw,
              dst + static_cast<size_t>(h + 2) * pw, T(0));
}

template <typename T>
Tensor<T> pad_chw(const Tensor<T>& x) {
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    Tensor<T> out({c, h + 2, w + 2});
    for (int ch = 0; ch < c; ++ch)
        pad_plane(x.ptr() + static_cast<size_t>(ch) * h * w,
                  out.ptr() + static_cast<size_t>(ch) * (h + 2) * (w + 2), h, w);
    return out;
}

template <typename T>
Tensor<T> exec_dense(const Tensor<T>& w, const Tensor<T>& b, const Tensor<T>& x,
                     const std::string& label) {
    const int in = w.shape[0];
    const int units = w.shape[1];
    int rows = 1;
    if (x.rank() == 2) rows = x.shape[0];
    else if (x.rank() != 1)
        throw ShapeError(label + ": dense input must be rank 1 or 2, got " +
                         shape_str(x.shape));
    if (x.shape.back() != in)
        throw ShapeError(label + ": expected input width " + std::to_string(in) +
                         ", got " + shape_str(x.shape));

    Tensor<T> y(x.rank() == 2 ? std::vector<int>{rows, units}
                              : std::vector<int>{units});
    for (int r = 0; r < rows; ++r)
        std::copy(b.data.begin(), b.data.end(),
                  y.data.begin() + static_cast<size_t>(r) * units);
    kernels::gemm_nn(x.ptr(), w.ptr(), y.ptr(), rows, in, units);
    return y;
}

// Row-wise softmax: rank-1 tensors are one row, rank-2 tensors one row per
// batch element.
template <typename T>
Tensor<T> exec_softmax(const Tensor<T>& x) {
    Tensor<T> y(x.shape);
    const int width = x.shape.back();
    const int rows = static_cast<int>(x.numel()) / width;
    for (int r = 0; r < rows; ++r) {
        const T* xi = x.ptr() + static_cast<size_t>(r) * width;
        T* yi = y.ptr() + static_cast<size_t>(r) * width;
        const T mx = *std::max_element(xi, xi + width);
        T total = T(0);
        for (int i = 0; i < width; ++i) {
            yi[i] = std::exp(xi[i] - mx);
            total += yi[i];
        }
        for (int i = 0; i < width; ++i) yi[i] /= total;
    }
    return y;
}

template <typename T>
T sigmoid_one(T v) {
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
}

// Core executor. Computes dynamic shapes so the same code serves both the
// declared-shape path and batched MLP evaluation.
template <typename T>
Tensor<T> run_graph(const ModelGraph<T>& m, const Tensor<T>& x,
                    ForwardCache<T>* cache) {
    const size_t n_nodes = m.spec.nodes.size();
    std::vector<Tensor<T>> outs(n_nodes);
    std::vector<std::vector<int32_t>> argmax(n_nodes);
    outs[0] = x;

    for (size_t i = 1; i < n_nodes; ++i) {
        const LayerSpec& n = m.spec.nodes[i];
        const std::string label = node_label(m.spec, static_cast<int>(i));
        const Tensor<T>& in = outs[static_cast<size_t>(n.inputs[0])];
        switch (n.kind) {
            case LayerKind::dense: {
                const int wp = m.weight_param[i];
                outs[i] = exec_dense(m.params[static_cast<size_t>(wp)],
                                     m.params[static_cast<size_t>(wp) + 1], in, label);
                break;
            }
            case LayerKind::conv2d: {
                const int wp = m.weight_param[i];
                const Tensor<T>& w = m.params[static_cast<size_t>(wp)];
                const Tensor<T>& b = m.params[static_cast<size_t>(wp) + 1];
                if (in.rank() != 3 || in.shape[0] != w.shape[1])
                    throw ShapeError(label + ": expected input [" +
                                     std::to_string(w.shape[1]) + ",h,w], got " +
                                     shape_str(in.shape));
                const int h = in.shape[1], wd = in.shape[2];
                const Tensor<T> padded = pad_chw(in);
                Tensor<T> y({n.channels, h, wd});
                kernels::conv3x3(padded.ptr(), w.ptr(), b.ptr(), y.ptr(),
                                 in.shape[0], n.channels, h, wd);
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::maxpool2d: {
                if (in.rank() != 3)
                    throw ShapeError(label + ": maxpool input must be [c,h,w]");
                const int c = in.shape[0], h = in.shape[1], wd = in.shape[2];
                if (h % 2 || wd % 2)
                    throw ShapeError(label + ": maxpool needs even geometry, got " +
                                     shape_str(in.shape));
                Tensor<T> y({c, h / 2, wd / 2});
                std::vector<int32_t>& am = argmax[i];
                am.resize(y.numel());
                size_t oi = 0;
                for (int ch = 0; ch < c; ++ch) {
                    const T* plane = in.ptr() + static_cast<size_t>(ch) * h * wd;
                    const size_t base = static_cast<size_t>(ch) * h * wd;
                    for (int y0 = 0; y0 < h; y0 += 2) {
                        for (int x0 = 0; x0 < wd; x0 += 2, ++oi) {
                            int best = y0 * wd + x0;
                            T bv = plane[best];
                            const int cand[3] = {y0 * wd + x0 + 1,
                                                 (y0 + 1) * wd + x0,
                                                 (y0 + 1) * wd + x0 + 1};
                            for (int idx : cand)
                                if (plane[idx] > bv) { bv = plane[idx]; best = idx; }
                            y.data[oi] = bv;
                            am[oi] = static_cast<int32_t>(base) + best;
                        }
                    }
                }
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::relu: {
                Tensor<T> y(in.shape);
                kernels::relu(in.ptr(), y.ptr(), in.numel());
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::sigmoid: {
                Tensor<T> y(in.shape);
                for (size_t j = 0; j < in.numel(); ++j)
                    y.data[j] = sigmoid_one(in.data[j]);
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::softmax: {
                if (in.rank() != 1 && in.rank() != 2)
                    throw ShapeError(label + ": softmax input must be rank 1 or 2");
                outs[i] = exec_softmax(in);
                break;
            }
            case LayerKind::flatten: {
                Tensor<T> y({static_cast<int>(in.numel())});
                y.data = in.data;
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::concat: {
                const Tensor<T>& in2 = outs[static_cast<size_t>(n.inputs[1])];
                if (in.rank() != in2.rank())
                    throw ShapeError(label + ": concat rank mismatch");
                if (in.rank() == 1) {
                    Tensor<T> y({in.shape[0] + in2.shape[0]});
                    std::copy(in.data.begin(), in.data.end(), y.data.begin());
                    std::copy(in2.data.begin(), in2.data.end(),
                              y.data.begin() + in.shape[0]);
                    outs[i] = std::move(y);
                } else if (in.rank() == 2) {
                    if (in.shape[0] != in2.shape[0])
                        throw ShapeError(label + ": concat row mismatch");
                    const int r = in.shape[0], a = in.shape[1], b2 = in2.shape[1];
                    Tensor<T> y({r, a + b2});
                    for (int row = 0; row < r; ++row) {
                        std::copy(in.data.begin() + static_cast<size_t>(row) * a,
                                  in.data.begin() + static_cast<size_t>(row + 1) * a,
                                  y.data.begin() + static_cast<size_t>(row) * (a + b2));
                        std::copy(in2.data.begin() + static_cast<size_t>(row) * b2,
                                  in2.data.begin() + static_cast<size_t>(row + 1) * b2,
                                  y.data.begin() + static_cast<size_t>(row) * (a + b2) + a);
                    }
                    outs[i] = std::move(y);
                } else if (in.rank() == 3) {
                    if (in.shape[1] != in2.shape[1] || in.shape[2] != in2.shape[2])
                        throw ShapeError(label + ": concat spatial mismatch " +
                                         shape_str(in.shape) + " vs " +
                                         shape_str(in2.shape));
                    Tensor<T> y({in.shape[0] + in2.shape[0], in.shape[1], in.shape[2]});
                    std::copy(in.data.begin(), in.data.end(), y.data.begin());
                    std::copy(in2.data.begin(), in2.data.end(),
                              y.data.begin() + in.numel());
                    outs[i] = std::move(y);
                } else {
                    throw ShapeError(label + ": concat supports rank 1-3");
                }
                break;
            }
            case LayerKind::upsample_nearest: {
                if (in.rank() != 3)
                    throw ShapeError(label + ": upsample input must be [c,h,w]");
                const int c = in.shape[0], h = in.shape[1], wd = in.shape[2];
                const int f = n.factor;
                Tensor<T> y({c, h * f, wd * f});
                for (int ch = 0; ch < c; ++ch) {
                    const T* sp = in.ptr() + static_cast<size_t>(ch) * h * wd;
                    T* dp = y.ptr() + static_cast<size_t>(ch) * h * f * wd * f;
                    for (int yy = 0; yy < h * f; ++yy) {
                        const T* srow = sp + static_cast<size_t>(yy / f) * wd;
                        T* drow = dp + static_cast<size_t>(yy) * wd * f;
                        for (int xx = 0; xx < wd * f; ++xx) drow[xx] = srow[xx / f];
                    }
                }
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::patch_split: {
                if (in.rank() != 3 || in.shape[0] != 1)
                    throw ShapeError(label + ": patch_split input must be [1,h,w]");
                const int h = in.shape[1], wd = in.shape[2];
                const int ph = h / n.rows, pw = wd / n.cols;
                Tensor<T> y({n.rows * n.cols, ph * pw});
                for (int gr = 0; gr < n.rows; ++gr)
                    for (int gc = 0; gc < n.cols; ++gc) {
                        T* dst = y.ptr() +
                                 static_cast<size_t>(gr * n.cols + gc) * ph * pw;
                        for (int yy = 0; yy < ph; ++yy)
                            std::copy(in.ptr() +
                                          static_cast<size_t>(gr * ph + yy) * wd +
                                          gc * pw,
                                      in.ptr() +
                                          static_cast<size_t>(gr * ph + yy) * wd +
                                          gc * pw + pw,
                                      dst + static_cast<size_t>(yy) * pw);
                    }
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::map_from_grid: {
                if (in.rank() != 2 || in.shape[0] != n.rows * n.cols)
                    throw ShapeError(label + ": map_from_grid input must be [" +
                                     std::to_string(n.rows * n.cols) + ",f]");
                const int f = in.shape[1];
                Tensor<T> y({f, n.rows, n.cols});
                for (int p = 0; p < n.rows * n.cols; ++p)
                    for (int c = 0; c < f; ++c)
                        y.data[static_cast<size_t>(c) * n.rows * n.cols + p] =
                            in.data[static_cast<size_t>(p) * f + c];
                outs[i] = std::move(y);
                break;
            }
            case LayerKind::input:
                throw GraphError(label + ": only node 0 may be an input");
        }
    }

    Tensor<T> result = outs.back();
    if (cache) {
        cache->outputs = std::move(outs);
        cache->argmax = std::move(argmax);
        cache->valid = true;
    }
    return result;
}

template <typename T>
bool rowwise_safe(const GraphSpec& spec) {
    for (const auto& n : spec.nodes) {
        switch (n.kind) {
            case LayerKind::input:
            case LayerKind::dense:
            case LayerKind::relu:
            case LayerKind::sigmoid:
            case LayerKind::softmax:
            case LayerKind::concat:
                break;
            default:
                return false;
        }
    }
    return true;
}

} // namespace

template <typename T>
Tensor<T> forward(const ModelGraph<T>& m, const Tensor<T>& x,
                  ForwardCache<T>* cache) {
    if (x.shape != m.input_shape())
        throw ShapeError("forward: expected input " + shape_str(m.input_shape()) +
                         ", got " + shape_str(x.shape));
    return run_graph(m, x, cache);
}

template <typename T>
Tensor<T> forward_batch(const ModelGraph<T>& m, const Tensor<T>& x,
                        ForwardCache<T>* cache) {
    if (!rowwise_safe<T>(m.spec) || m.input_shape().size() != 1)
        throw GraphError("forward_batch: graph contains non-row-wise layers");
    if (x.rank() != 2 || x.shape[1] != m.input_shape()[0])
        throw ShapeError("forward_batch: expected [batch," +
                         std::to_string(m.input_shape()[0]) + "], got " +
                         shape_str(x.shape));
    return run_graph(m, x, cache);
}

// ---------------------------------------------------------------- backward

template <typename T>
std::vector<Tensor<T>> backward(const ModelGraph<T>& m,
                                const ForwardCache<T>& cache,
                                const Tensor<T>& loss_grad) {
    if (!cache.valid || cache.outputs.size() != m.spec.nodes.size())
        throw InvalidArgument("backward: stale or missing forward cache");
    if (loss_grad.shape != cache.outputs.back().shape)
        throw ShapeError("backward: loss gradient shape " +
                         shape_str(loss_grad.shape) + " does not match output " +
                         shape_str(cache.outputs.back().shape));

    std::vector<Tensor<T>> grads;
    grads.reserve(m.params.size());
    for (const auto& p : m.params) grads.emplace_back(p.shape);

    std::vector<Tensor<T>> node_grad(m.spec.nodes.size());
    auto accum = [&](int node, Tensor<T>&& g) {
        Tensor<T>& slot = node_grad[static_cast<size_t>(node)];
        if (slot.data.empty()) {
            slot = std::move(g);
        } else {
            for (size_t j = 0; j < slot.data.size(); ++j) slot.data[j] += g.data[j];
        }
    };

    node_grad.back() = loss_grad;

    for (size_t i = m.spec.nodes.size(); i-- > 1;) {
        const LayerSpec& n = m.spec.nodes[i];
        Tensor<T>& g = node_grad[i];
        if (g.data.empty()) continue; // node does not feed the output
        const Tensor<T>& in = cache.outputs[static_cast<size_t>(n.inputs[0])];

        switch (n.kind) {
            case LayerKind::dense: {
                const int wp = m.weight_param[i];
                const Tensor<T>& w = m.params[static_cast<size_t>(wp)];
                Tensor<T>& gw = grads[static_cast<size_t>(wp)];
                Tensor<T>& gb = grads[static_cast<size_t>(wp) + 1];
                const int rows = in.rank() == 2 ? in.shape[0] : 1;
                const int fan_in = w.shape[0];
                const int units = w.shape[1];
                // gw += x^T g ; gb += column sums of g ; gx = g w^T
                kernels::gemm_tn(in.ptr(), g.ptr(), gw.ptr(), rows, fan_in, units);
                for (int r = 0; r < rows; ++r)
                    for (int u = 0; u < units; ++u)
                        gb.data[static_cast<size_t>(u)] +=
                            g.data[static_cast<size_t>(r) * units + u];
                Tensor<T> gx(in.shape);
                kernels::gemm_nt(g.ptr(), w.ptr(), gx.ptr(), rows, fan_in, units);
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::conv2d: {
                const int wp = m.weight_param[i];
                const Tensor<T>& w = m.params[static_cast<size_t>(wp)];
                Tensor<T>& gw = grads[static_cast<size_t>(wp)];
                Tensor<T>& gb = grads[static_cast<size_t>(wp) + 1];
                const int cin = in.shape[0], h = in.shape[1], wd = in.shape[2];
                const int cout = n.channels;
                const Tensor<T> in_pad = pad_chw(in);
                kernels::conv3x3_grad_weights(in_pad.ptr(), g.ptr(), gw.ptr(),
                                              gb.ptr(), cin, cout, h, wd);
                // Backward data is a 3x3 conv of the padded output gradient
                // with spatially flipped, channel-transposed weights.
                Tensor<T> wt({cin, cout, 3, 3});
                for (int k = 0; k < cout; ++k)
                    for (int c = 0; c < cin; ++c)
                        for (int t = 0; t < 9; ++t)
                            wt.data[(static_cast<size_t>(c) * cout + k) * 9 + t] =
                                w.data[(static_cast<size_t>(k) * cin + c) * 9 + (8 - t)];
                const Tensor<T> g_pad = pad_chw(g);
                Tensor<T> gx({cin, h, wd});
                kernels::conv3x3(g_pad.ptr(), wt.ptr(), nullptr, gx.ptr(), cout,
                                 cin, h, wd);
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::maxpool2d: {
                Tensor<T> gx(in.shape);
                const std::vector<int32_t>& am = cache.argmax[i];
                for (size_t j = 0; j < am.size(); ++j)
                    gx.data[static_cast<size_t>(am[j])] += g.data[j];
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::relu: {
                Tensor<T> gx(in.shape);
                kernels::relu_grad(in.ptr(), g.ptr(), gx.ptr(), in.numel());
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::sigmoid: {
                const Tensor<T>& y = cache.outputs[i];
                Tensor<T> gx(in.shape);
                for (size_t j = 0; j < y.numel(); ++j)
                    gx.data[j] = g.data[j] * y.data[j] * (T(1) - y.data[j]);
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::softmax: {
                const Tensor<T>& y = cache.outputs[i];
                const int width = y.shape.back();
                const int rows = static_cast<int>(y.numel()) / width;
                Tensor<T> gx(in.shape);
                for (int r = 0; r < rows; ++r) {
                    const size_t off = static_cast<size_t>(r) * width;
                    T dot = T(0);
                    for (int j = 0; j < width; ++j)
                        dot += g.data[off + j] * y.data[off + j];
                    for (int j = 0; j < width; ++j)
                        gx.data[off + j] = y.data[off + j] * (g.data[off + j] - dot);
                }
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::flatten: {
                Tensor<T> gx(in.shape);
                gx.data = g.data;
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::concat: {
                const Tensor<T>& in2 = cache.outputs[static_cast<size_t>(n.inputs[1])];
                Tensor<T> g1(in.shape);
                Tensor<T> g2(in2.shape);
                if (in.rank() == 1 || in.rank() == 3) {
                    std::copy(g.data.begin(), g.data.begin() + in.numel(),
                              g1.data.begin());
                    std::copy(g.data.begin() + in.numel(), g.data.end(),
                              g2.data.begin());
                } else { // rank 2
                    const int r = in.shape[0], a = in.shape[1], b2 = in2.shape[1];
                    for (int row = 0; row < r; ++row) {
                        const T* src = g.ptr() + static_cast<size_t>(row) * (a + b2);
                        std::copy(src, src + a,
                                  g1.data.begin() + static_cast<size_t>(row) * a);
                        std::copy(src + a, src + a + b2,
                                  g2.data.begin() + static_cast<size_t>(row) * b2);
                    }
                }
                accum(n.inputs[0], std::move(g1));
                accum(n.inputs[1], std::move(g2));
                break;
            }
            case LayerKind::upsample_nearest: {
                const int c = in.shape[0], h = in.shape[1], wd = in.shape[2];
                const int f = n.factor;
                Tensor<T> gx(in.shape);
                for (int ch = 0; ch < c; ++ch) {
                    const T* gp = g.ptr() + static_cast<size_t>(ch) * h * f * wd * f;
                    T* xp = gx.ptr() + static_cast<size_t>(ch) * h * wd;
                    for (int yy = 0; yy < h * f; ++yy) {
                        const T* grow = gp + static_cast<size_t>(yy) * wd * f;
                        T* xrow = xp + static_cast<size_t>(yy / f) * wd;
                        for (int xx = 0; xx < wd * f; ++xx) xrow[xx / f] += grow[xx];
                    }
                }
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::patch_split: {
                const int h = in.shape[1], wd = in.shape[2];
                const int ph = h / n.rows, pw = wd / n.cols;
                Tensor<T> gx(in.shape);
                for (int gr = 0; gr < n.rows; ++gr)
                    for (int gc = 0; gc < n.cols; ++gc) {
                        const T* src = g.ptr() +
                                       static_cast<size_t>(gr * n.cols + gc) * ph * pw;
                        for (int yy = 0; yy < ph; ++yy)
                            std::copy(src + static_cast<size_t>(yy) * pw,
                                      src + static_cast<size_t>(yy + 1) * pw,
                                      gx.ptr() +
                                          static_cast<size_t>(gr * ph + yy) * wd +
                                          gc * pw);
                    }
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::map_from_grid: {
                const int f = in.shape[1];
                Tensor<T> gx(in.shape);
                for (int p = 0; p < n.rows * n.cols; ++p)
                    for (int c = 0; c < f; ++c)
                        gx.data[static_cast<size_t>(p) * f + c] =
                            g.data[static_cast<size_t>(c) * n.rows * n.cols + p];
                accum(n.inputs[0], std::move(gx));
                break;
            }
            case LayerKind::input:
                break;
        }
        g = Tensor<T>(); // free as we go
    }
    return grads;
}

ModelGraph<double> to_double(const ModelGraph<float>& m) {
    ModelGraph<double> out;
    out.spec = m.spec;
    out.seed = m.seed;
    out.trainable = m.trainable;
    out.out_shapes = m.out_shapes;
    out.weight_param = m.weight_param;
    out.params.reserve(m.params.size());
    for (const auto& p : m.params) out.params.push_back(tensor_cast<double>(p));
    return out;
}

ModelGraph<float> to_float(const ModelGraph<double>& m) {
    ModelGraph<float> out;
    out.spec = m.spec;
    out.seed = m.seed;
    out.trainable = m.trainable;
    out.out_shapes = m.out_shapes;
    out.weight_param = m.weight_param;
    out.params.reserve(m.params.size());
    for (const auto& p : m.params) out.params.push_back(tensor_cast<float>(p));
    return out;
}

template struct ModelGraph<float>;
template struct ModelGraph<double>;
template ModelGraph<float> build_network<float>(const GraphSpec&, uint64_t);
template ModelGraph<double> build_network<double>(const GraphSpec&, uint64_t);
template Tensor<float> forward<float>(const ModelGraph<float>&,
                                      const Tensor<float>&, ForwardCache<float>*);
template Tensor<double> forward<double>(const ModelGraph<double>&,
                                        const Tensor<double>&,
                                        ForwardCache<double>*);
template Tensor<float> forward_batch<float>(const ModelGraph<float>&,
                                            const Tensor<float>&,
                                            ForwardCache<float>*);
template Tensor<double> forward_batch<double>(const ModelGraph<double>&,
                                              const Tensor<double>&,
                                              ForwardCache<double>*);
template std::vector<Tensor<float>> backward<float>(const ModelGraph<float>&,
                                                    const ForwardCache<float>&,
                                                    const Tensor<float>&);
template std::vector<Tensor<double>> backward<double>(const ModelGraph<double>&,
                                                      const ForwardCache<double>&,
                                                      const Tensor<double>&);

} // namespace finrad::neural
