#pragma once

#include "m2dl/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace m2dl::test {

using namespace m2dl::cnn;

inline double* param(NetworkState& st, std::size_t layer, std::size_t k, bool bias) {
    return bias ? &st.biases[layer][k] : &st.weights[layer].data()[k];
}

// Which side of every kink the forward pass is on: ReLU outputs that are
// positive and the max-pool winners.
inline std::vector<std::uint32_t> kink_pattern(const NetworkSpec& spec, const NetworkState& st, const Tensor4& x) {
    const auto cache = forward(spec, st, x).second;
    std::vector<std::uint32_t> pattern;
    for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        const LayerSpec& s = spec.layers[l];
        if (s.kind == LayerKind::MaxPool) {
            pattern.insert(pattern.end(), cache.argmax[l].begin(), cache.argmax[l].end());
        } else if (s.kind != LayerKind::Output && s.activation == Activation::ReLU) {
            for (double v : cache.activations[l + 1].data) pattern.push_back(v > 0.0);
        }
    }
    return pattern;
}

struct FdReport {
    double worst = 0.0;  // max over parameter tensors of ||analytic - numeric|| / max(||analytic||, ||numeric||)
    std::size_t checked = 0;
    std::size_t skipped = 0;  // entries whose +-h perturbation crosses a kink
};

// Central differences on the batch loss with h = 1e-5, at most `sample`
// evenly spaced entries per parameter tensor.
inline FdReport fd_check(const NetworkSpec& spec, NetworkState st, const Tensor4& x, const Matrix& y,
                  std::size_t sample = 100000) {
    auto [pred, cache] = forward(spec, st, x);
    const Gradients g = backward(spec, st, cache, y);
    const double h = 1e-5;
    FdReport rep;
    for (std::size_t l = 0; l < spec.layers.size(); ++l)
        for (bool bias : {false, true}) {
            const std::size_t count = bias ? st.biases[l].size() : st.weights[l].size();
            if (count == 0) continue;
            const std::size_t stride = std::max<std::size_t>(1, count / sample);
            double diff = 0.0, na = 0.0, nn = 0.0;
            for (std::size_t k = 0; k < count; k += stride) {
                double* p = param(st, l, k, bias);
                const double keep = *p;
                *p = keep + h;
                const double up = loss(predict(spec, st, x), y);
                const auto pattern_up = kink_pattern(spec, st, x);
                *p = keep - h;
                const double down = loss(predict(spec, st, x), y);
                const auto pattern_down = kink_pattern(spec, st, x);
                *p = keep;
                ++rep.checked;
                if (pattern_up != pattern_down) {
                    ++rep.skipped;
                    continue;
                }
                const double numeric = (up - down) / (2.0 * h);
                const double analytic = bias ? g.biases[l][k] : g.weights[l].data()[k];
                diff += (analytic - numeric) * (analytic - numeric);
                na += analytic * analytic;
                nn += numeric * numeric;
            }
            const double denom = std::sqrt(std::max(na, nn));
            if (denom > 0.0) rep.worst = std::max(rep.worst, std::sqrt(diff) / denom);
        }
    return rep;
}

}  // namespace m2dl::test
