#include "m2dl/prox.hpp"

#include "m2dl/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

namespace m2dl::prox {

namespace {

void require_nonneg(double tau, const char* op) {
    if (!(tau >= 0.0) || !std::isfinite(tau))
        throw Error(Errc::InvalidArgument, std::string(op) + ": tau must be finite and >= 0, got " +
                                               format_double(tau));
}

// Rebuilds U * diag(s) * V^T keeping only the strictly positive entries of s.
Matrix rebuild(const SvdResult& svd, const std::vector<double>& s, std::size_t rows, std::size_t cols) {
    std::size_t r = 0;
    while (r < s.size() && s[r] > 0.0) ++r;
    Matrix us(rows, r), vt(r, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < r; ++j) us(i, j) = svd.u(i, j) * s[j];
    for (std::size_t j = 0; j < r; ++j)
        for (std::size_t k = 0; k < cols; ++k) vt(j, k) = svd.vt(j, k);
    return matmul(us, vt);
}

}  // namespace

Matrix soft_threshold(const Matrix& m, double tau) {
    require_nonneg(tau, "soft_threshold");
    Matrix out = m;
    for (double& v : out.data()) {
        const double mag = std::abs(v) - tau;
        v = mag > 0.0 ? std::copysign(mag, v) : 0.0;
    }
    return out;
}

Matrix l21_shrink(const Matrix& m, double tau, ShrinkAxis axis) {
    require_nonneg(tau, "l21_shrink");
    Matrix out = m;
    const bool rows = axis == ShrinkAxis::Rows;
    const std::size_t groups = rows ? m.rows() : m.cols();
    const std::size_t len = rows ? m.cols() : m.rows();
    auto at = [&](Matrix& x, std::size_t g, std::size_t k) -> double& { return rows ? x(g, k) : x(k, g); };
    for (std::size_t g = 0; g < groups; ++g) {
        double sq = 0.0;
        for (std::size_t k = 0; k < len; ++k) sq += at(out, g, k) * at(out, g, k);
        const double norm = std::sqrt(sq);
        const double scale = norm > tau ? 1.0 - tau / norm : 0.0;
        for (std::size_t k = 0; k < len; ++k) at(out, g, k) *= scale;
    }
    return out;
}

Matrix svt(const Matrix& m, double tau) {
    require_nonneg(tau, "svt");
    if (tau == 0.0) return m;
    const SvdResult svd = thin_svd(m);
    std::vector<double> s = svd.s;
    for (double& v : s) v = std::max(v - tau, 0.0);
    return rebuild(svd, s, m.rows(), m.cols());
}

std::vector<double> project_l1_ball(std::span<const double> values, double radius) {
    require_nonneg(radius, "project_l1_ball");
    std::vector<double> out(values.begin(), values.end());
    for (double& v : out) v = std::max(v, 0.0);
    if (std::accumulate(out.begin(), out.end(), 0.0) <= radius) return out;

    // Sort-and-threshold projection onto the simplex of the given radius.
    std::vector<double> sorted = out;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
        cumsum += sorted[j];
        const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) theta = candidate;
    }
    for (double& v : out) v = std::max(v - theta, 0.0);
    return out;
}

Matrix project_trace_ball(const Matrix& m, double tau) {
    require_nonneg(tau, "project_trace_ball");
    if (tau == 0.0) return Matrix(m.rows(), m.cols());
    const SvdResult svd = thin_svd(m);
    if (std::accumulate(svd.s.begin(), svd.s.end(), 0.0) <= tau) return m;
    return rebuild(svd, project_l1_ball(svd.s, tau), m.rows(), m.cols());
}

double l1_norm(const Matrix& m) {
    double s = 0.0;
    for (double v : m.data()) s += std::abs(v);
    return s;
}

double l21_norm(const Matrix& m, ShrinkAxis axis) {
    const bool rows = axis == ShrinkAxis::Rows;
    const std::size_t groups = rows ? m.rows() : m.cols();
    const std::size_t len = rows ? m.cols() : m.rows();
    double total = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        double sq = 0.0;
        for (std::size_t k = 0; k < len; ++k) {
            const double v = rows ? m(g, k) : m(k, g);
            sq += v * v;
        }
        total += std::sqrt(sq);
    }
    return total;
}

}  // namespace m2dl::prox
