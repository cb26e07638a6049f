#include "doctest.h"
#include "support.hpp"

#include "m2dl/error.hpp"
#include "m2dl/prox.hpp"

#include <algorithm>
#include <numeric>

using namespace m2dl;
using namespace m2dl::prox;
using namespace m2dl::test;

namespace {

// Minimizer of 0.5 (y - x)^2 + tau |y| by grid refinement around the best node.
double grid_min_1d(double x, double tau) {
    auto f = [&](double y) { return 0.5 * (y - x) * (y - x) + tau * std::abs(y); };
    double lo = -std::abs(x) - 1.0, hi = std::abs(x) + 1.0;
    for (int round = 0; round < 12; ++round) {
        double best = lo, fb = f(lo);
        const double step = (hi - lo) / 200.0;
        for (int k = 1; k <= 200; ++k) {
            const double y = lo + k * step;
            if (f(y) < fb) fb = f(y), best = y;
        }
        lo = best - step;
        hi = best + step;
    }
    return 0.5 * (lo + hi);
}

Matrix perturb(const Matrix& m, Rng& rng, double scale) {
    Matrix p = m;
    for (double& v : p.data()) v += scale * rng.normal();
    return p;
}

}  // namespace

TEST_CASE("soft threshold values") {
    CHECK(soft_threshold(Matrix(1, 1, 3.0), 1.0)(0, 0) == 2.0);
    CHECK(soft_threshold(Matrix(1, 1, -0.5), 1.0)(0, 0) == 0.0);
    CHECK(soft_threshold(Matrix(1, 1, -3.0), 1.0)(0, 0) == -2.0);
    CHECK_THROWS_AS(soft_threshold(Matrix(1, 1), -0.1), Error);
}

TEST_CASE("soft threshold matches grid search") {
    const Matrix m = random_matrix(6, 5, 1, 2.0);
    for (double tau : {0.0, 0.3, 1.0, 2.5}) {
        const Matrix s = soft_threshold(m, tau);
        for (std::size_t k = 0; k < m.size(); ++k) CHECK(std::abs(s.data()[k] - grid_min_1d(m.data()[k], tau)) < 1e-6);
    }
}

TEST_CASE("l21 shrink values") {
    const Matrix col = Matrix::from_rows({{3}, {4}});
    const Matrix r = l21_shrink(col, 2.5, ShrinkAxis::Columns);
    CHECK(r(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(r(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(frobenius_norm(l21_shrink(col, 5.0, ShrinkAxis::Columns)) == 0.0);
    CHECK(frobenius_norm(l21_shrink(col, 7.0, ShrinkAxis::Columns)) == 0.0);
    CHECK(frobenius_norm(l21_shrink(Matrix(3, 2), 1.0, ShrinkAxis::Rows)) == 0.0);
    CHECK_THROWS_AS(l21_shrink(col, -1.0, ShrinkAxis::Rows), Error);
}

TEST_CASE("l21 shrink against per-group formula") {
    const Matrix m = random_matrix(5, 7, 2);
    for (auto axis : {ShrinkAxis::Rows, ShrinkAxis::Columns}) {
        const Matrix r = l21_shrink(m, 1.1, axis);
        const bool rows = axis == ShrinkAxis::Rows;
        const std::size_t groups = rows ? m.rows() : m.cols(), len = rows ? m.cols() : m.rows();
        for (std::size_t g = 0; g < groups; ++g) {
            double norm = 0.0;
            for (std::size_t k = 0; k < len; ++k) {
                const double v = rows ? m(g, k) : m(k, g);
                norm += v * v;
            }
            norm = std::sqrt(norm);
            const double factor = std::max(0.0, 1.0 - 1.1 / norm);
            for (std::size_t k = 0; k < len; ++k) {
                const double in = rows ? m(g, k) : m(k, g), out = rows ? r(g, k) : r(k, g);
                CHECK(std::abs(out - factor * in) < 1e-14);
            }
        }
    }
}

TEST_CASE("svt on a diagonal and at zero threshold") {
    const Matrix d = Matrix::diagonal(std::vector<double>{3.0, 1.0, 0.2});
    const Matrix r = svt(d, 0.5);
    CHECK(max_abs_diff(r, Matrix::diagonal(std::vector<double>{2.5, 0.5, 0.0})) < 1e-12);
    const Matrix m = random_matrix(4, 3, 3);
    CHECK(max_abs_diff(svt(m, 0.0), m) < 1e-12);
}

TEST_CASE("prox outputs beat random perturbations of their objectives") {
    Rng rng(4);
    for (std::uint64_t inst = 0; inst < 3; ++inst) {
        const Matrix m = random_matrix(5, 5, 200 + inst);
        const double tau = 0.7;
        auto f_l1 = [&](const Matrix& y) { return 0.5 * std::pow(frobenius_norm(y - m), 2) + tau * l1_norm(y); };
        auto f_nuc = [&](const Matrix& y) {
            return 0.5 * std::pow(frobenius_norm(y - m), 2) + tau * eigen_nuclear(y);
        };
        auto f_l21 = [&](const Matrix& y) {
            return 0.5 * std::pow(frobenius_norm(y - m), 2) + tau * l21_norm(y, ShrinkAxis::Rows);
        };
        const Matrix s1 = soft_threshold(m, tau), s2 = svt(m, tau), s3 = l21_shrink(m, tau, ShrinkAxis::Rows);
        for (int k = 0; k < 300; ++k) {
            const double scale = k % 2 ? 1e-3 : 0.1;
            CHECK(f_l1(s1) <= f_l1(perturb(s1, rng, scale)));
            CHECK(f_nuc(s2) <= f_nuc(perturb(s2, rng, scale)));
            CHECK(f_l21(s3) <= f_l21(perturb(s3, rng, scale)));
        }
    }
}

TEST_CASE("operators are nonexpansive") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix x = random_matrix(4, 6, 300 + s), y = random_matrix(4, 6, 400 + s);
        const double d = frobenius_norm(x - y);
        CHECK(frobenius_norm(soft_threshold(x, 0.4) - soft_threshold(y, 0.4)) <= d + 1e-12);
        CHECK(frobenius_norm(l21_shrink(x, 0.4, ShrinkAxis::Rows) - l21_shrink(y, 0.4, ShrinkAxis::Rows)) <= d + 1e-12);
        CHECK(frobenius_norm(l21_shrink(x, 0.4, ShrinkAxis::Columns) - l21_shrink(y, 0.4, ShrinkAxis::Columns)) <=
              d + 1e-12);
        CHECK(frobenius_norm(svt(x, 0.4) - svt(y, 0.4)) <= d + 1e-12);
        CHECK(frobenius_norm(project_trace_ball(x, 1.5) - project_trace_ball(y, 1.5)) <= d + 1e-12);
    }
}

TEST_CASE("svt does not increase the nuclear norm") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix x = random_matrix(5, 3, 500 + s);
        CHECK(nuclear_norm(svt(x, 0.3)) <= nuclear_norm(x) + 1e-12);
    }
}

TEST_CASE("l21 shrink keeps group directions") {
    const Matrix m = random_matrix(6, 4, 6);
    const Matrix r = l21_shrink(m, 0.8, ShrinkAxis::Rows);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double ratio = r(i, 0) / m(i, 0);
        CHECK(ratio >= 0.0);
        for (std::size_t j = 0; j < m.cols(); ++j) CHECK(std::abs(r(i, j) - ratio * m(i, j)) < 1e-14);
    }
}

TEST_CASE("trace ball projection") {
    const Matrix d = Matrix::diagonal(std::vector<double>{3.0, 1.0});
    const auto s = thin_svd(project_trace_ball(d, 2.0)).s;
    CHECK(s[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(std::abs(s[1]) < 1e-12);
    const Matrix inside = random_matrix(3, 3, 7, 0.1);
    CHECK(project_trace_ball(inside, nuclear_norm(inside) + 1.0) == inside);
    CHECK(frobenius_norm(project_trace_ball(random_matrix(3, 3, 8), 0.0)) == 0.0);
    for (std::uint64_t k = 0; k < 10; ++k)
        CHECK(nuclear_norm(project_trace_ball(random_matrix(4, 6, 600 + k), 1.3)) <= 1.3 + 1e-8);
}

TEST_CASE("trace ball projection is the closest point of the ball") {
    Rng rng(9);
    const Matrix m = random_matrix(4, 4, 10);
    const double tau = 1.0;
    const Matrix p = project_trace_ball(m, tau);
    const double d = frobenius_norm(p - m);
    for (int k = 0; k < 500; ++k) {
        Matrix q = perturb(p, rng, 0.05);
        q = q * (tau / std::max(tau, eigen_nuclear(q)));  // feasible candidate
        CHECK(d <= frobenius_norm(q - m) + 1e-12);
    }
}

TEST_CASE("l1 ball projection of a nonnegative vector") {
    std::vector<double> v{3.0, 1.0};
    auto p = project_l1_ball(v, 2.0);
    CHECK(p[0] == doctest::Approx(2.0));
    CHECK(p[1] == doctest::Approx(0.0));
    v = {0.5, 0.2};
    CHECK(project_l1_ball(v, 2.0) == v);
    v = {1.0, 1.0, 1.0};
    p = project_l1_ball(v, 1.5);
    for (double x : p) CHECK(x == doctest::Approx(0.5));
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.5));
}
