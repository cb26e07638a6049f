#include "m2dl/cnn.hpp"

#include "m2dl/bundle.hpp"
#include "m2dl/error.hpp"
#include "m2dl/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace m2dl::cnn {

std::string_view activation_name(Activation a) noexcept {
    switch (a) {
        case Activation::ReLU: return "ReLU";
        case Activation::Sigmoid: return "Sigmoid";
        case Activation::Tanh: return "Tanh";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    for (Activation a : kAllActivations)
        if (activation_name(a) == name) return a;
    throw Error(Errc::InvalidArgument, "unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::ReLU: return x < 0.0 ? 0.0 : x;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case Activation::Tanh: return 2.0 / (1.0 + std::exp(-2.0 * x)) - 1.0;
    }
    return x;
}

double activation_slope(Activation a, double y) noexcept {
    switch (a) {
        case Activation::ReLU: return y > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Tanh: return 1.0 - y * y;
    }
    return 1.0;
}

LayerSpec LayerSpec::conv(std::size_t out_channels, std::size_t kh, std::size_t kw, Activation act) {
    return {LayerKind::Conv, out_channels, kh, kw, act};
}
LayerSpec LayerSpec::max_pool() { return {LayerKind::MaxPool, 0, 2, 2, Activation::ReLU}; }
LayerSpec LayerSpec::fully_connected(std::size_t units, Activation act) {
    return {LayerKind::FullyConnected, units, 0, 0, act};
}
LayerSpec LayerSpec::output(std::size_t units) { return {LayerKind::Output, units, 0, 0, Activation::ReLU}; }

NetworkSpec NetworkSpec::standard(std::size_t outputs, Activation act, std::size_t image_size) {
    NetworkSpec spec;
    spec.input = {1, image_size, image_size};
    spec.layers = {LayerSpec::conv(32, 5, 5, act), LayerSpec::max_pool(),
                   LayerSpec::conv(32, 3, 3, act), LayerSpec::max_pool(),
                   LayerSpec::conv(24, 3, 3, act), LayerSpec::max_pool(),
                   LayerSpec::fully_connected(512, act), LayerSpec::output(outputs)};
    return spec;
}

namespace {

std::string layer_label(std::size_t l, const LayerSpec& s) {
    static const char* names[] = {"conv", "maxpool", "fc", "output"};
    return "layer " + std::to_string(l) + " (" + names[static_cast<int>(s.kind)] + ")";
}

}  // namespace

std::vector<Shape> NetworkSpec::shapes() const {
    if (input.size() == 0) throw Error(Errc::InvalidArgument, "network input has zero size");
    std::vector<Shape> out;
    Shape cur = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const LayerSpec& s = layers[l];
        switch (s.kind) {
            case LayerKind::Conv:
                if (s.units == 0 || s.kernel_h == 0 || s.kernel_w == 0)
                    throw Error(Errc::InvalidArgument, layer_label(l, s) + ": zero-sized kernel");
                if (s.kernel_h > cur.h || s.kernel_w > cur.w)
                    throw Error(Errc::DimensionMismatch,
                                layer_label(l, s) + ": kernel " + std::to_string(s.kernel_h) + "x" +
                                    std::to_string(s.kernel_w) + " larger than input " +
                                    std::to_string(cur.h) + "x" + std::to_string(cur.w));
                cur = {s.units, cur.h - s.kernel_h + 1, cur.w - s.kernel_w + 1};
                break;
            case LayerKind::MaxPool:
                if (cur.h % 2 || cur.w % 2)
                    throw Error(Errc::DimensionMismatch, layer_label(l, s) + ": odd input " +
                                                             std::to_string(cur.h) + "x" + std::to_string(cur.w));
                cur = {cur.c, cur.h / 2, cur.w / 2};
                break;
            case LayerKind::FullyConnected:
            case LayerKind::Output:
                if (s.units == 0) throw Error(Errc::InvalidArgument, layer_label(l, s) + ": zero units");
                cur = {s.units, 1, 1};
                break;
        }
        out.push_back(cur);
    }
    return out;
}

std::size_t NetworkSpec::outputs() const {
    if (layers.empty() || layers.back().kind != LayerKind::Output)
        throw Error(Errc::InvalidArgument, "network must end with an Output layer");
    return layers.back().units;
}

NetworkState init_state(const NetworkSpec& spec, std::uint64_t seed, double eta) {
    const auto shapes = spec.shapes();
    spec.outputs();
    Rng rng(seed);
    NetworkState state;
    state.eta = eta;
    Shape in = spec.input;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& s = spec.layers[l];
        std::size_t rows = 0, cols = 0, fan_in = 0, fan_out = 0;
        if (s.kind == LayerKind::Conv) {
            rows = s.units;
            cols = in.c * s.kernel_h * s.kernel_w;
            fan_in = cols;
            fan_out = s.units * s.kernel_h * s.kernel_w;
        } else if (s.kind != LayerKind::MaxPool) {
            rows = s.units;
            cols = in.size();
            fan_in = cols;
            fan_out = rows;
        }
        Matrix w(rows, cols);
        if (rows) {
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (double& v : w.data()) v = rng.uniform(-limit, limit);
        }
        state.weights.push_back(std::move(w));
        state.biases.emplace_back(rows, 0.0);
        in = shapes[l];
    }
    return state;
}

NetworkState zeros_like(const NetworkState& state) {
    NetworkState z;
    z.eta = state.eta;
    for (const auto& w : state.weights) z.weights.emplace_back(w.rows(), w.cols());
    for (const auto& b : state.biases) z.biases.emplace_back(b.size(), 0.0);
    return z;
}

namespace {

// (C*kh*kw) x (N*oh*ow) patch matrix.
Matrix im2col(const Tensor4& in, std::size_t kh, std::size_t kw) {
    const std::size_t oh = in.h - kh + 1, ow = in.w - kw + 1, pix = oh * ow;
    Matrix cols(in.c * kh * kw, in.n * pix);
    for (std::size_t c = 0; c < in.c; ++c)
        for (std::size_t p = 0; p < kh; ++p)
            for (std::size_t q = 0; q < kw; ++q) {
                double* row = &cols((c * kh + p) * kw + q, 0);
                for (std::size_t b = 0; b < in.n; ++b)
                    for (std::size_t i = 0; i < oh; ++i)
                        std::memcpy(row + b * pix + i * ow, &in.data[in.index(b, c, i + p, q)],
                                    ow * sizeof(double));
            }
    return cols;
}

void col2im_add(const Matrix& cols, Tensor4& out, std::size_t kh, std::size_t kw) {
    const std::size_t oh = out.h - kh + 1, ow = out.w - kw + 1, pix = oh * ow;
    for (std::size_t c = 0; c < out.c; ++c)
        for (std::size_t p = 0; p < kh; ++p)
            for (std::size_t q = 0; q < kw; ++q) {
                const double* row = cols.row((c * kh + p) * kw + q).data();
                for (std::size_t b = 0; b < out.n; ++b)
                    for (std::size_t i = 0; i < oh; ++i) {
                        double* dst = &out.data[out.index(b, c, i + p, q)];
                        const double* src = row + b * pix + i * ow;
                        for (std::size_t j = 0; j < ow; ++j) dst[j] += src[j];
                    }
            }
}

Matrix as_rows(const Tensor4& t) { return Matrix(t.n, t.sample_size(), t.data); }

void check_params(const NetworkSpec& spec, const NetworkState& state) {
    if (state.weights.size() != spec.layers.size() || state.biases.size() != spec.layers.size())
        throw Error(Errc::DimensionMismatch, "network state has " + std::to_string(state.weights.size()) +
                                                 " layers, spec has " + std::to_string(spec.layers.size()));
    const auto shapes = spec.shapes();
    Shape in = spec.input;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& s = spec.layers[l];
        std::size_t rows = 0, cols = 0;
        if (s.kind == LayerKind::Conv) {
            rows = s.units;
            cols = in.c * s.kernel_h * s.kernel_w;
        } else if (s.kind != LayerKind::MaxPool) {
            rows = s.units;
            cols = in.size();
        }
        if (state.weights[l].rows() != rows || state.weights[l].cols() != cols || state.biases[l].size() != rows)
            throw Error(Errc::DimensionMismatch, layer_label(l, s) + ": parameter shape mismatch");
        in = shapes[l];
    }
}

Tensor4 dense_forward(const Tensor4& in, const Matrix& w, std::span<const double> bias, bool linear,
                      Activation act) {
    Matrix pre = matmul_nt(as_rows(in), w);
    Tensor4 out(in.n, w.rows(), 1, 1);
    for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t k = 0; k < w.rows(); ++k) {
            const double v = pre(b, k) + bias[k];
            out.data[b * w.rows() + k] = linear ? v : activate(act, v);
        }
    return out;
}

}  // namespace

Tensor4 conv_forward(const Tensor4& input, const Matrix& weights, std::span<const double> bias,
                     std::size_t kh, std::size_t kw, Activation act) {
    if (kh == 0 || kw == 0 || kh > input.h || kw > input.w)
        throw Error(Errc::DimensionMismatch, "conv_forward: kernel " + std::to_string(kh) + "x" +
                                                 std::to_string(kw) + " does not fit input " +
                                                 std::to_string(input.h) + "x" + std::to_string(input.w));
    if (weights.cols() != input.c * kh * kw || bias.size() != weights.rows())
        throw Error(Errc::DimensionMismatch, "conv_forward: weight/bias shape mismatch");
    const std::size_t oh = input.h - kh + 1, ow = input.w - kw + 1, pix = oh * ow;
    const Matrix pre = matmul(weights, im2col(input, kh, kw));
    Tensor4 out(input.n, weights.rows(), oh, ow);
    for (std::size_t b = 0; b < input.n; ++b)
        for (std::size_t k = 0; k < weights.rows(); ++k) {
            const double* src = pre.row(k).data() + b * pix;
            double* dst = &out.data[out.index(b, k, 0, 0)];
            for (std::size_t i = 0; i < pix; ++i) dst[i] = activate(act, src[i] + bias[k]);
        }
    return out;
}

PoolResult maxpool_forward(const Tensor4& in) {
    if (in.h % 2 || in.w % 2)
        throw Error(Errc::DimensionMismatch, "maxpool_forward: odd input " + std::to_string(in.h) + "x" +
                                                 std::to_string(in.w));
    PoolResult r{Tensor4(in.n, in.c, in.h / 2, in.w / 2), {}};
    r.argmax.resize(r.output.data.size());
    std::size_t o = 0;
    for (std::size_t b = 0; b < in.n; ++b)
        for (std::size_t c = 0; c < in.c; ++c)
            for (std::size_t i = 0; i < in.h / 2; ++i)
                for (std::size_t j = 0; j < in.w / 2; ++j, ++o) {
                    std::size_t best = in.index(b, c, 2 * i, 2 * j);
                    for (std::size_t p = 0; p < 2; ++p)
                        for (std::size_t q = 0; q < 2; ++q) {
                            const std::size_t idx = in.index(b, c, 2 * i + p, 2 * j + q);
                            if (in.data[idx] > in.data[best]) best = idx;
                        }
                    r.output.data[o] = in.data[best];
                    r.argmax[o] = static_cast<std::uint32_t>(best);
                }
    return r;
}

std::pair<Matrix, ForwardCache> forward(const NetworkSpec& spec, const NetworkState& state,
                                        const Tensor4& batch) {
    if (batch.c != spec.input.c || batch.h != spec.input.h || batch.w != spec.input.w)
        throw Error(Errc::DimensionMismatch, "forward: batch is " + std::to_string(batch.c) + "x" +
                                                 std::to_string(batch.h) + "x" + std::to_string(batch.w) +
                                                 ", network input is " + std::to_string(spec.input.c) + "x" +
                                                 std::to_string(spec.input.h) + "x" +
                                                 std::to_string(spec.input.w));
    check_params(spec, state);
    spec.outputs();
    ForwardCache cache;
    cache.activations.reserve(spec.layers.size() + 1);
    cache.argmax.resize(spec.layers.size());
    cache.activations.push_back(batch);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& s = spec.layers[l];
        const Tensor4& in = cache.activations.back();
        Tensor4 out;
        switch (s.kind) {
            case LayerKind::Conv:
                out = conv_forward(in, state.weights[l], state.biases[l], s.kernel_h, s.kernel_w, s.activation);
                break;
            case LayerKind::MaxPool: {
                PoolResult pr = maxpool_forward(in);
                out = std::move(pr.output);
                cache.argmax[l] = std::move(pr.argmax);
                break;
            }
            case LayerKind::FullyConnected:
                out = dense_forward(in, state.weights[l], state.biases[l], false, s.activation);
                break;
            case LayerKind::Output:
                out = dense_forward(in, state.weights[l], state.biases[l], true, s.activation);
                break;
        }
        cache.activations.push_back(std::move(out));
    }
    Matrix pred = as_rows(cache.activations.back());
    return {std::move(pred), std::move(cache)};
}

Matrix predict(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch) {
    return forward(spec, state, batch).first;
}

double loss(const Matrix& predictions, const Matrix& targets) {
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols())
        throw Error(Errc::DimensionMismatch, "loss: predictions and targets differ in shape");
    if (predictions.rows() == 0) return 0.0;
    const Matrix r = predictions - targets;
    return 0.5 * dot(r, r) / static_cast<double>(predictions.rows());
}

Gradients backward(const NetworkSpec& spec, const NetworkState& state, const ForwardCache& cache,
                   const Matrix& targets) {
    check_params(spec, state);
    if (cache.activations.size() != spec.layers.size() + 1)
        throw Error(Errc::DimensionMismatch, "backward: cache does not match the network");
    const Tensor4& out = cache.activations.back();
    if (targets.rows() != out.n || targets.cols() != out.sample_size())
        throw Error(Errc::DimensionMismatch, "backward: targets are " + std::to_string(targets.rows()) + "x" +
                                                 std::to_string(targets.cols()) + ", predictions " +
                                                 std::to_string(out.n) + "x" + std::to_string(out.sample_size()));
    Gradients g = zeros_like(state);
    const double inv_n = out.n ? 1.0 / static_cast<double>(out.n) : 0.0;

    // d loss / d (output of the current layer)
    Tensor4 grad(out.n, out.c, out.h, out.w);
    for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = (out.data[i] - targets.data()[i]) * inv_n;

    for (std::size_t l = spec.layers.size(); l-- > 0;) {
        const LayerSpec& s = spec.layers[l];
        const Tensor4& in = cache.activations[l];
        const Tensor4& y = cache.activations[l + 1];
        const bool need_input_grad = l > 0;
        Tensor4 grad_in(in.n, in.c, in.h, in.w);
        switch (s.kind) {
            case LayerKind::Conv: {
                const std::size_t pix = y.h * y.w;
                Matrix dpre(s.units, y.n * pix);
                for (std::size_t b = 0; b < y.n; ++b)
                    for (std::size_t k = 0; k < s.units; ++k) {
                        const std::size_t base = y.index(b, k, 0, 0);
                        double* dst = &dpre(k, b * pix);
                        for (std::size_t i = 0; i < pix; ++i)
                            dst[i] = grad.data[base + i] * activation_slope(s.activation, y.data[base + i]);
                    }
                const Matrix cols = im2col(in, s.kernel_h, s.kernel_w);
                g.weights[l] = matmul_nt(dpre, cols);
                for (std::size_t k = 0; k < s.units; ++k) {
                    const auto row = dpre.row(k);
                    g.biases[l][k] = std::accumulate(row.begin(), row.end(), 0.0);
                }
                if (need_input_grad) col2im_add(matmul_tn(state.weights[l], dpre), grad_in, s.kernel_h, s.kernel_w);
                break;
            }
            case LayerKind::MaxPool:
                for (std::size_t o = 0; o < grad.data.size(); ++o) grad_in.data[cache.argmax[l][o]] += grad.data[o];
                break;
            case LayerKind::FullyConnected:
            case LayerKind::Output: {
                const bool linear = s.kind == LayerKind::Output;
                Matrix dpre(y.n, s.units);
                for (std::size_t i = 0; i < dpre.size(); ++i)
                    dpre.data()[i] = linear ? grad.data[i] : grad.data[i] * activation_slope(s.activation, y.data[i]);
                g.weights[l] = matmul_tn(dpre, as_rows(in));
                for (std::size_t b = 0; b < y.n; ++b)
                    for (std::size_t k = 0; k < s.units; ++k) g.biases[l][k] += dpre(b, k);
                if (need_input_grad) {
                    const Matrix dx = matmul(dpre, state.weights[l]);
                    std::copy(dx.data().begin(), dx.data().end(), grad_in.data.begin());
                }
                break;
            }
        }
        grad = std::move(grad_in);
    }
    return g;
}

NetworkState sgd_step(const NetworkState& state, const Gradients& grads, double eta) {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw Error(Errc::InvalidArgument, "sgd_step: eta must be >= 0");
    if (grads.weights.size() != state.weights.size() || grads.biases.size() != state.biases.size())
        throw Error(Errc::DimensionMismatch, "sgd_step: gradient/state layer count mismatch");
    NetworkState next = state;
    for (std::size_t l = 0; l < state.weights.size(); ++l) {
        if (grads.weights[l].rows() != state.weights[l].rows() || grads.weights[l].cols() != state.weights[l].cols() ||
            grads.biases[l].size() != state.biases[l].size())
            throw Error(Errc::DimensionMismatch, "sgd_step: gradient shape mismatch at layer " + std::to_string(l));
        if (!all_finite(grads.weights[l]) ||
            !std::all_of(grads.biases[l].begin(), grads.biases[l].end(), [](double v) { return std::isfinite(v); }))
            throw Error(Errc::NonFinite, "sgd_step: non-finite gradient at layer " + std::to_string(l));
        if (eta == 0.0) continue;
        auto w = next.weights[l].data();
        auto gw = grads.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * gw[i];
        for (std::size_t i = 0; i < next.biases[l].size(); ++i) next.biases[l][i] -= eta * grads.biases[l][i];
    }
    return next;
}

Tensor4 slice(const Tensor4& t, std::span<const std::size_t> indices) {
    Tensor4 out(indices.size(), t.c, t.h, t.w);
    const std::size_t len = t.sample_size();
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= t.n) throw Error(Errc::InvalidArgument, "slice: index out of range");
        std::copy_n(t.data.begin() + static_cast<std::ptrdiff_t>(indices[i] * len), len,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * len));
    }
    return out;
}

EpochResult train_epoch(const NetworkSpec& spec, const NetworkState& state, const Tensor4& images,
                        const Matrix& targets, double eta, std::size_t batch_size, std::uint64_t seed) {
    if (images.n == 0) throw Error(Errc::InvalidArgument, "train_epoch: empty dataset");
    if (targets.rows() != images.n)
        throw Error(Errc::DimensionMismatch, "train_epoch: " + std::to_string(images.n) + " images, " +
                                                 std::to_string(targets.rows()) + " targets");
    if (batch_size == 0) throw Error(Errc::InvalidArgument, "train_epoch: batch_size must be >= 1");
    std::vector<std::size_t> order(images.n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));

    EpochResult res{state, 0.0};
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        const std::span<const std::size_t> idx(order.data() + start, end - start);
        const Tensor4 xb = slice(images, idx);
        Matrix yb(idx.size(), targets.cols());
        for (std::size_t i = 0; i < idx.size(); ++i)
            std::copy_n(targets.row(idx[i]).begin(), targets.cols(), yb.row(i).begin());
        auto [pred, cache] = forward(spec, res.state, xb);
        total += loss(pred, yb) * static_cast<double>(idx.size());
        const Gradients g = backward(spec, res.state, cache, yb);
        res.state = sgd_step(res.state, g, eta);
    }
    res.mean_loss = total / static_cast<double>(images.n);
    return res;
}

namespace {

std::size_t feature_layer(const NetworkSpec& spec) {
    std::size_t fc = spec.layers.size();
    for (std::size_t l = 0; l < spec.layers.size(); ++l)
        if (spec.layers[l].kind == LayerKind::FullyConnected) fc = l;
    if (fc == spec.layers.size())
        throw Error(Errc::InvalidArgument, "extract_features: network has no fully connected layer");
    return fc;
}

Tensor4 forward_to(const NetworkSpec& spec, const NetworkState& state, Tensor4 act, std::size_t last,
                   const ConvHook* hook) {
    for (std::size_t l = 0; l <= last; ++l) {
        const LayerSpec& s = spec.layers[l];
        if (s.kind == LayerKind::Conv) {
            act = conv_forward(act, state.weights[l], state.biases[l], s.kernel_h, s.kernel_w, s.activation);
            if (hook) {
                const Matrix flat(act.n, act.sample_size(), std::move(act.data));
                const Matrix out = (*hook)(l, flat);
                if (out.rows() != flat.rows() || out.cols() != flat.cols())
                    throw Error(Errc::DimensionMismatch, "extract_features: conv hook changed the shape of layer " +
                                                             std::to_string(l));
                act.data.assign(out.data().begin(), out.data().end());
            }
        } else if (s.kind == LayerKind::MaxPool) {
            act = maxpool_forward(act).output;
        } else {
            act = dense_forward(act, state.weights[l], state.biases[l], false, s.activation);
        }
    }
    return act;
}

}  // namespace

Matrix extract_features(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch,
                        std::size_t chunk) {
    const std::size_t fc = feature_layer(spec);
    check_params(spec, state);

    Matrix out(batch.n, spec.layers[fc].units);
    chunk = std::max<std::size_t>(1, chunk);
    for (std::size_t start = 0; start < batch.n; start += chunk) {
        const std::size_t end = std::min(batch.n, start + chunk);
        std::vector<std::size_t> idx(end - start);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor4 act = forward_to(spec, state, slice(batch, idx), fc, nullptr);
        std::copy(act.data.begin(), act.data.end(), out.row(start).begin());
    }
    return out;
}

Matrix extract_features(const NetworkSpec& spec, const NetworkState& state, const Tensor4& batch,
                        const ConvHook& hook) {
    const std::size_t fc = feature_layer(spec);
    check_params(spec, state);
    if (!hook) return extract_features(spec, state, batch);
    Tensor4 act = forward_to(spec, state, batch, fc, &hook);
    return Matrix(batch.n, spec.layers[fc].units, std::move(act.data));
}

void save_checkpoint(std::ostream& out, const NetworkSpec& spec, const NetworkState& state) {
    check_params(spec, state);
    BundleWriter w(out, "m2dl-cnn-checkpoint", 1);
    w.put("input", std::to_string(spec.input.c) + " " + std::to_string(spec.input.h) + " " +
                       std::to_string(spec.input.w));
    w.put("layers", spec.layers.size());
    static const char* kinds[] = {"conv", "maxpool", "fc", "output"};
    for (const auto& s : spec.layers)
        w.put("layer", std::string(kinds[static_cast<int>(s.kind)]) + " " + std::to_string(s.units) + " " +
                           std::to_string(s.kernel_h) + " " + std::to_string(s.kernel_w) + " " +
                           std::string(activation_name(s.activation)));
    w.put("eta", state.eta);
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        w.put_matrix("weights", state.weights[l]);
        w.put_vector("bias", state.biases[l]);
    }
}

void save_checkpoint(const std::string& path, const NetworkSpec& spec, const NetworkState& state) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    save_checkpoint(out, spec, state);
}

std::pair<NetworkSpec, NetworkState> load_checkpoint(std::istream& in) {
    BundleReader r(in, "m2dl-cnn-checkpoint", 1);
    NetworkSpec spec;
    std::istringstream input(r.get("input"));
    input >> spec.input.c >> spec.input.h >> spec.input.w;
    const std::size_t n = r.get_size("layers");
    for (std::size_t l = 0; l < n; ++l) {
        std::istringstream ls(r.get("layer"));
        std::string kind, act;
        LayerSpec s;
        ls >> kind >> s.units >> s.kernel_h >> s.kernel_w >> act;
        if (kind == "conv") s.kind = LayerKind::Conv;
        else if (kind == "maxpool") s.kind = LayerKind::MaxPool;
        else if (kind == "fc") s.kind = LayerKind::FullyConnected;
        else if (kind == "output") s.kind = LayerKind::Output;
        else throw Error(Errc::Parse, "unknown layer kind '" + kind + "'");
        s.activation = parse_activation(act);
        spec.layers.push_back(s);
    }
    NetworkState state;
    state.eta = r.get_double("eta");
    for (std::size_t l = 0; l < n; ++l) {
        state.weights.push_back(r.get_matrix("weights"));
        state.biases.push_back(r.get_vector("bias"));
    }
    check_params(spec, state);
    return {std::move(spec), std::move(state)};
}

std::pair<NetworkSpec, NetworkState> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return load_checkpoint(in);
}

}  // namespace m2dl::cnn
