#include "doctest.h"
#include "support.hpp"

#include "m2dl/error.hpp"
#include "m2dl/tensor.hpp"

#include <sstream>

using namespace m2dl;
using namespace m2dl::test;

TEST_CASE("matmul identity and annihilation") {
    const Matrix b = Matrix::from_rows({{1, 2}, {3, 4}});
    CHECK(matmul(Matrix::identity(2), b) == b);
    const Matrix r = matmul(Matrix::from_rows({{1, 0}, {0, 0}}), Matrix::from_rows({{0}, {5}}));
    CHECK(r == Matrix::from_rows({{0}, {0}}));
}

TEST_CASE("matmul against triple loop") {
    const Matrix a = random_matrix(7, 5, 1), b = random_matrix(5, 3, 2);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
    CHECK(max_abs_diff(matmul_tn(a, random_matrix(7, 4, 3)), naive_matmul(transpose(a), random_matrix(7, 4, 3))) <
          1e-12);
    CHECK(max_abs_diff(matmul_nt(a, random_matrix(6, 5, 4)), naive_matmul(a, transpose(random_matrix(6, 5, 4)))) <
          1e-12);
}

TEST_CASE("matmul rejects mismatched shapes") {
    try {
        matmul(Matrix(2, 3), Matrix(2, 3));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::DimensionMismatch);
    }
}

TEST_CASE("matmul is associative") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const Matrix a = random_matrix(4, 6, 10 + s), b = random_matrix(6, 3, 20 + s), c = random_matrix(3, 5, 30 + s);
        const Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
        CHECK(frobenius_norm(left - right) / frobenius_norm(left) < 1e-9);
    }
}

TEST_CASE("operations leave their inputs untouched") {
    const Matrix a = random_matrix(5, 4, 5), b = random_matrix(4, 3, 6);
    const Matrix a0 = a, b0 = b;
    (void)matmul(a, b);
    (void)thin_svd(a);
    (void)transpose(a);
    (void)nuclear_norm(a);
    CHECK(a == a0);
    CHECK(b == b0);
}

TEST_CASE("thin svd of simple matrices") {
    auto svd = thin_svd(Matrix::diagonal(std::vector<double>{3.0, 1.0}));
    REQUIRE(svd.s.size() == 2);
    CHECK(svd.s[0] == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(svd.s[1] == doctest::Approx(1.0).epsilon(1e-14));
    svd = thin_svd(Matrix(3, 2));
    CHECK(svd.s == std::vector<double>{0.0, 0.0});
}

TEST_CASE("thin svd factors are orthonormal and reconstruct") {
    for (auto [m, n] : {std::pair<std::size_t, std::size_t>{6, 4}, {4, 6}, {5, 5}, {1, 3}}) {
        const Matrix a = random_matrix(m, n, 40 + m * n);
        const auto svd = thin_svd(a);
        const std::size_t k = std::min(m, n);
        CHECK(svd.u.rows() == m);
        CHECK(svd.u.cols() == k);
        CHECK(svd.vt.rows() == k);
        CHECK(svd.vt.cols() == n);
        CHECK(max_abs_diff(matmul_tn(svd.u, svd.u), Matrix::identity(k)) < 1e-12);
        CHECK(max_abs_diff(matmul_nt(svd.vt, svd.vt), Matrix::identity(k)) < 1e-12);
        CHECK(frobenius_norm(a - reconstruct(svd)) <= 1e-8 * std::max(1.0, frobenius_norm(a)));
        for (std::size_t i = 0; i + 1 < k; ++i) CHECK(svd.s[i] >= svd.s[i + 1]);
        for (double s : svd.s) CHECK(s >= 0.0);
    }
}

TEST_CASE("nuclear norm equals the sum of eigenvalue square roots of A^T A") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Matrix a = random_matrix(5, 5, 60 + s);
        CHECK(nuclear_norm(a) == doctest::Approx(eigen_singular_values(a).sum()).epsilon(1e-8));
        CHECK(spectral_norm(a) == doctest::Approx(eigen_singular_values(a)(0)).epsilon(1e-8));
    }
}

TEST_CASE("thin svd rejects non-finite input") {
    Matrix a = random_matrix(3, 3, 7);
    a(1, 1) = std::nan("");
    CHECK_THROWS_AS(thin_svd(a), Error);
}

TEST_CASE("solve_spd small systems") {
    const Matrix b = random_matrix(3, 2, 8);
    CHECK(max_abs_diff(solve_spd(Matrix::identity(3), b), b) < 1e-15);
    const Matrix x = solve_spd(Matrix::from_rows({{2, 0}, {0, 4}}), Matrix::from_rows({{2}, {8}}));
    CHECK(max_abs_diff(x, Matrix::from_rows({{1}, {2}})) < 1e-15);
}

TEST_CASE("solve_spd residual on random SPD systems") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Matrix g = random_matrix(8, 8, 70 + s);
        Matrix a = matmul_tn(g, g);
        for (std::size_t i = 0; i < 8; ++i) a(i, i) += 0.5;
        const Matrix b = random_matrix(8, 3, 80 + s);
        const Matrix x = solve_spd(a, b);
        CHECK(frobenius_norm(matmul(a, x) - b) <= 1e-8 * std::max(1.0, frobenius_norm(b)));
        const Matrix ref = from_eigen(to_eigen(a).ldlt().solve(to_eigen(b)));
        CHECK(max_abs_diff(x, ref) < 1e-9);
    }
}

TEST_CASE("solve_spd rejects indefinite and asymmetric matrices") {
    try {
        solve_spd(Matrix::from_rows({{1, 0}, {0, -1}}), Matrix(2, 1, 1.0));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NotPositiveDefinite);
    }
    CHECK_THROWS_AS(solve_spd(Matrix::from_rows({{2, 1}, {0, 2}}), Matrix(2, 1, 1.0)), Error);
}

TEST_CASE("cholesky factor is reusable") {
    const Matrix g = random_matrix(6, 6, 90);
    Matrix a = matmul_tn(g, g);
    for (std::size_t i = 0; i < 6; ++i) a(i, i) += 1.0;
    const CholeskyFactor f(a);
    for (std::uint64_t s = 0; s < 3; ++s) {
        const Matrix b = random_matrix(6, 2, 100 + s);
        CHECK(frobenius_norm(matmul(a, f.solve(b)) - b) < 1e-10);
    }
}

TEST_CASE("csv round trip is bit exact") {
    Matrix a = random_matrix(4, 3, 110, 1e3);
    a(0, 0) = 0.1;
    a(3, 2) = -1e-300;
    std::stringstream ss;
    write_csv(ss, a);
    CHECK(read_csv(ss) == a);
}

TEST_CASE("csv parse errors name the line") {
    std::stringstream ss("1,2\n3,x\n");
    try {
        read_csv(ss);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::Parse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    std::stringstream ragged("1,2\n3\n");
    CHECK_THROWS_AS(read_csv(ragged), Error);
}

TEST_CASE("tensor4 indexing") {
    Tensor4 t(2, 3, 4, 5);
    CHECK(t.data.size() == 2 * 3 * 4 * 5);
    t.at(1, 2, 3, 4) = 7.0;
    CHECK(t.data.back() == 7.0);
    CHECK(t.sample(1).size() == 60);
}
