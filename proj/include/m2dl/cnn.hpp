#pragma once

#include "m2dl/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace m2dl::cnn {

enum class Activation { ReLU, Sigmoid, Tanh };

std::string_view activation_name(Activation a) noexcept;  // "ReLU", "Sigmoid", "Tanh"
Activation parse_activation(std::string_view name);
inline constexpr Activation kAllActivations[] = {Activation::ReLU, Activation::Sigmoid, Activation::Tanh};

double activate(Activation a, double x) noexcept;
// Derivative expressed through the activation's output y = activate(a, x).
double activation_slope(Activation a, double y) noexcept;

enum class LayerKind { Conv, MaxPool, FullyConnected, Output };

struct LayerSpec {
    LayerKind kind = LayerKind::Output;
    std::size_t units = 1;  // output channels (Conv) or neurons (FullyConnected/Output)
    std::size_t kernel_h = 0, kernel_w = 0;
    Activation activation = Activation::ReLU;  // ignored by MaxPool and Output

    static LayerSpec conv(std::size_t out_channels, std::size_t kh, std::size_t kw, Activation act);
    static LayerSpec max_pool();
    static LayerSpec fully_connected(std::size_t units, Activation act);
    static LayerSpec output(std::size_t units);

    bool operator==(const LayerSpec&) const = default;
};

struct Shape {
    std::size_t c = 0, h = 0, w = 0;
    std::size_t size() const noexcept { return c * h * w; }
    bool operator==(const Shape&) const = default;
};

struct NetworkSpec {
    Shape input{1, 64, 64};
    std::vector<LayerSpec> layers;

    // Three conv + 2x2 max-pool stages (32@5x5, 32@3x3, 24@3x3), a 512-unit
    // fully connected layer and a linear output of `outputs` units.
    static NetworkSpec standard(std::size_t outputs, Activation act = Activation::ReLU,
                                std::size_t image_size = 64);

    // Output shape of every layer; throws naming the first layer that does not fit.
    std::vector<Shape> shapes() const;
    std::size_t outputs() const;
    bool operator==(const NetworkSpec&) const = default;
};

// Learned parameters. Conv weights are K x (C*kh*kw) in (k, c, p, q) order;
// dense weights are units x inputs. Pooling layers hold empty entries.
struct NetworkState {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
    double eta = 0.01;
};

using Gradients = NetworkState;

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed, double eta = 0.01);
NetworkState zeros_like(const NetworkState& state);

// Valid, stride-1 convolution followed by the activation.
Tensor4 conv_forward(const Tensor4& input, const Matrix& weights, std::span<const double> bias,
                     std::size_t kernel_h, std::size_t kernel_w, Activation act);

struct PoolResult {
    Tensor4 output;
    std::vector<std::uint32_t> argmax;  // flat input index per output element
};

// 2x2 stride-2 max pooling; ties go to the first element in row-major order.
PoolResult maxpool_forward(const Tensor4& input);

struct ForwardCache {
    std::vector<Tensor4> activations;  // [0] = input, [l + 1] = output of layer l
    std::vector<std::vector<std::uint32_t>> argmax;
};

std::pair<Matrix, ForwardCache> forward(const NetworkSpec& spec, const NetworkState& state,
                                        const Tensor4& batch);
Matrix predict(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch);

// 0.5 * mean over samples of ||target - prediction||^2.
double loss(const Matrix& predictions, const Matrix& targets);

Gradients backward(const NetworkSpec& spec, const NetworkState& state, const ForwardCache& cache,
                   const Matrix& targets);

NetworkState sgd_step(const NetworkState& state, const Gradients& grads, double eta);

struct EpochResult {
    NetworkState state;
    double mean_loss = 0.0;
};

// One pass over (images, targets) in minibatches, order shuffled from `seed`.
EpochResult train_epoch(const NetworkSpec& spec, const NetworkState& state, const Tensor4& images,
                        const Matrix& targets, double eta, std::size_t batch_size, std::uint64_t seed);

// Post-activation outputs of the last fully connected layer, one row per sample.
Matrix extract_features(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch,
                        std::size_t chunk = 64);

// Receives the flattened output of conv layer `layer` (N x C*H*W) and returns
// its replacement of the same shape.
using ConvHook = std::function<Matrix(std::size_t layer, const Matrix& activations)>;

// Same features, computed over the whole batch at once with `hook` applied
// after every conv layer.
Matrix extract_features(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch,
                        const ConvHook& hook);

Tensor4 slice(const Tensor4& t, std::span<const std::size_t> indices);

void save_checkpoint(std::ostream& out, const NetworkSpec& spec, const NetworkState& state);
void save_checkpoint(const std::string& path, const NetworkSpec& spec, const NetworkState& state);
std::pair<NetworkSpec, NetworkState> load_checkpoint(std::istream& in);
std::pair<NetworkSpec, NetworkState> load_checkpoint(const std::string& path);

}  // namespace m2dl::cnn
