#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "finrad/tensor.hpp"

namespace finrad::neural {

/// The fixed layer vocabulary. conv2d is always 3x3 / stride 1 / zero pad 1;
/// maxpool2d is always 2x2 / stride 2. patch_split and map_from_grid are
/// parameter-free reshapes that let a dense stack run over every tile of an
/// image with shared weights.
enum class LayerKind {
    input,
    dense,
    conv2d,
    maxpool2d,
    relu,
    sigmoid,
    softmax,
    flatten,
    concat,
    upsample_nearest,
    patch_split,
    map_from_grid,
};

std::string kind_name(LayerKind k);
LayerKind kind_from_name(const std::string& name);

struct LayerSpec {
    LayerKind kind = LayerKind::input;
    std::vector<int> inputs; // indices of producer nodes; empty for input
    int units = 0;           // dense
    int channels = 0;        // conv2d
    int factor = 0;          // upsample_nearest
    int rows = 0, cols = 0;  // patch_split / map_from_grid
    std::vector<int> shape;  // input node only
};

/// Layered network description: a DAG in topological index order, node 0 is
/// the single input, the last node is the output.
struct GraphSpec {
    std::vector<LayerSpec> nodes;
};

/// Convenience for assembling GraphSpecs. Every method returns the new node's
/// index.
struct GraphBuilder {
    GraphSpec spec;
    int input(std::vector<int> shape);
    int dense(int from, int units);
    int conv2d(int from, int channels);
    int maxpool(int from);
    int relu(int from);
    int sigmoid(int from);
    int softmax(int from);
    int flatten(int from);
    int concat(int a, int b);
    int upsample(int from, int factor);
    int patch_split(int from, int rows, int cols);
    int map_from_grid(int from, int rows, int cols);
};

/// Validates a spec and infers per-node output shapes. Throws GraphError /
/// ShapeError naming the offending node.
std::vector<std::vector<int>> infer_shapes(const GraphSpec& spec);

/// A built network: spec plus parameter tensors in topological order
/// (weight, then bias, for each dense/conv node).
template <typename T>
struct ModelGraph {
    GraphSpec spec;
    uint64_t seed = 0;
    std::vector<Tensor<T>> params;
    std::vector<uint8_t> trainable;          // parallel to params
    std::vector<std::vector<int>> out_shapes; // per node
    std::vector<int> weight_param;           // node -> param index of weight, or -1

    const std::vector<int>& input_shape() const { return spec.nodes[0].shape; }
    const std::vector<int>& output_shape() const { return out_shapes.back(); }
    size_t parameter_count() const;
};

/// He-uniform initialization from one PCG64 stream derived from the seed.
/// Identical (spec, seed) gives bit-identical weights on every platform.
template <typename T>
ModelGraph<T> build_network(const GraphSpec& spec, uint64_t seed);

template <typename T>
struct ForwardCache {
    std::vector<Tensor<T>> outputs;            // per node
    std::vector<std::vector<int32_t>> argmax;  // per node, maxpool only
    bool valid = false;
};

/// Runs the graph on an input matching the declared input shape.
template <typename T>
Tensor<T> forward(const ModelGraph<T>& m, const Tensor<T>& x,
                  ForwardCache<T>* cache = nullptr);

/// Batched evaluation for graphs built from row-wise-safe layers only
/// (dense / relu / sigmoid / rank-1 concat): x is [batch, input_size].
template <typename T>
Tensor<T> forward_batch(const ModelGraph<T>& m, const Tensor<T>& x,
                        ForwardCache<T>* cache = nullptr);

/// Reverse-mode gradients for every parameter tensor. The cache must come
/// from a forward call on the same model.
template <typename T>
std::vector<Tensor<T>> backward(const ModelGraph<T>& m,
                                const ForwardCache<T>& cache,
                                const Tensor<T>& loss_grad);

ModelGraph<double> to_double(const ModelGraph<float>& m);
ModelGraph<float> to_float(const ModelGraph<double>& m);

extern template struct ModelGraph<float>;
extern template struct ModelGraph<double>;

} // namespace finrad::neural
