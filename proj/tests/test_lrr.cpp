#include "doctest.h"
#include "support.hpp"

#include "m2dl/error.hpp"
#include "m2dl/lrr.hpp"

#include <sstream>

using namespace m2dl;
using namespace m2dl::lrr;
using namespace m2dl::test;

namespace {

// Shape interaction matrix V V^T of the nonzero singular directions.
Matrix shape_interaction(const Matrix& x, double rel_cut = 1e-9) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(x), Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > rel_cut * s(0)) ++r;
    const Eigen::MatrixXd v = svd.matrixV().leftCols(r);
    return from_eigen(v * v.transpose());
}

// Largest column norm of U S^-1 V^T; the clean solution (V V^T, 0) is optimal
// exactly when this does not exceed lambda.
double certificate(const Matrix& x, double rel_cut = 1e-9) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(to_eigen(x), Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > rel_cut * s(0)) ++r;
    const Eigen::MatrixXd g = svd.matrixU().leftCols(r) * s.head(r).cwiseInverse().asDiagonal() *
                              svd.matrixV().leftCols(r).transpose();
    return g.colwise().norm().maxCoeff();
}

Matrix low_rank(std::size_t d, std::size_t n, std::size_t r, std::uint64_t seed, double scale) {
    return matmul(random_matrix(d, r, seed), random_matrix(r, n, seed + 1)) * scale;
}

double objective(const Matrix& z, const Matrix& e, double lambda) {
    return eigen_nuclear(z) + lambda * prox::l21_norm(e, prox::ShrinkAxis::Columns);
}

double distance_to_span(const Eigen::VectorXd& x, const Eigen::MatrixXd& basis) {
    const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() *
                              Eigen::MatrixXd::Identity(basis.rows(), basis.cols());
    return (x - q * (q.transpose() * x)).norm();
}

}  // namespace

TEST_CASE("well scaled identity data is its own representation") {
    const Matrix x = Matrix::identity(4) * 5.0;
    REQUIRE(certificate(x) <= 0.3);
    const auto r = solve_lrr({x, x, 0.3});
    CHECK(r.converged);
    CHECK(r.residual_data < 1e-6);
    CHECK(r.residual_constraint < 1e-6);
    CHECK(rel_frobenius(r.z_star, Matrix::identity(4)) < 1e-4);
    CHECK(max_abs(r.e_star) < 1e-4);
}

TEST_CASE("unit identity data at lambda 0.3 is cheaper as pure error") {
    // Certificate: Y = 0.3 I lies in the l2,1 subdifferential at E = I and
    // ||A^T Y||_2 = 0.3 <= 1, so (Z, E) = (0, I) is optimal with value 1.2,
    // while (I, 0) costs 4.
    const Matrix x = Matrix::identity(4);
    const auto r = solve_lrr({x, x, 0.3});
    CHECK(r.converged);
    CHECK(objective(r.z_star, r.e_star, 0.3) == doctest::Approx(1.2).epsilon(1e-5));
    CHECK(rel_frobenius(r.e_star, Matrix::identity(4)) < 1e-4);
    CHECK(max_abs(r.z_star) < 1e-4);
}

TEST_CASE("rank one clean data recovers v v^T") {
    Eigen::VectorXd u(5), v(4);
    u << 1, -2, 0.5, 3, 1;
    v << 2, 1, -1, 0.5;
    const Matrix x = from_eigen(u * v.transpose() * (10.0 / (u.norm() * v.norm())));
    REQUIRE(certificate(x) <= 0.3);
    const auto r = solve_lrr({x, x, 0.3});
    CHECK(r.converged);
    const Eigen::VectorXd vh = v.normalized();
    CHECK(rel_frobenius(r.z_star, from_eigen(vh * vh.transpose())) < 1e-4);
}

TEST_CASE("clean low rank data matches the shape interaction matrix") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        Matrix x = low_rank(20, 15, 3, 10 + 7 * s, 1.0);
        x *= 2.0 * certificate(x) / 0.3;  // certificate scales as 1 / scale
        REQUIRE(certificate(x) <= 0.3);
        const auto r = solve_lrr({x, x, 0.3});
        CHECK(r.converged);
        CHECK(r.iterations <= 500);
        CHECK(r.residual_data < 1e-6);
        CHECK(r.residual_constraint < 1e-6);
        CHECK(rel_frobenius(r.z_star, shape_interaction(x)) < 1e-4);
    }
}

TEST_CASE("a corrupted column is absorbed by the error term") {
    // Small, numerous clean columns: lambda times the outlier norm stays below one.
    Matrix x = low_rank(20, 300, 2, 40, 1.0);
    double clean_scale = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) n += x(i, j) * x(i, j);
        clean_scale = std::max(clean_scale, std::sqrt(n));
    }
    x *= 0.25 / clean_scale;
    clean_scale = 0.25;
    CHECK(certificate(x) < 0.3);
    Rng rng(41);
    const std::size_t bad = 5;
    Matrix noise(20, 1);
    for (double& v : noise.data()) v = rng.normal();
    const double nn = frobenius_norm(noise);
    for (std::size_t i = 0; i < 20; ++i) x(i, bad) += 10.0 * clean_scale * noise(i, 0) / nn;

    const auto r = solve_lrr({x, x, 0.3});
    CHECK(r.converged);
    std::vector<double> norms(x.cols());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double n = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) n += r.e_star(i, j) * r.e_star(i, j);
        norms[j] = std::sqrt(n);
    }
    CHECK(norms[bad] > 0.5 * 10.0 * clean_scale);
    for (std::size_t j = 0; j < x.cols(); ++j)
        if (j != bad) CHECK(norms[bad] >= 10.0 * norms[j]);
}

TEST_CASE("a large outlier is cheaper to represent than to absorb") {
    Matrix x = low_rank(10, 12, 2, 40, 1.0);
    for (std::size_t i = 0; i < 10; ++i) x(i, 5) += 50.0 * (i % 2 ? 1.0 : -1.0);
    const auto r = solve_lrr({x, x, 0.3});
    CHECK(r.converged);
    CHECK(frobenius_norm(r.e_star) < 1e-6);
}

TEST_CASE("penalty trajectory is nondecreasing and capped") {
    const Matrix x = low_rank(8, 10, 2, 50, 1.0) + random_matrix(8, 10, 52, 0.05);
    AlmOpts o;
    o.mu_max = 2.0;
    const auto r = solve_lrr({x, x, 0.3}, o);
    REQUIRE(!r.mu_trace.empty());
    CHECK(r.mu_trace.front() == o.mu0);
    for (std::size_t k = 1; k < r.mu_trace.size(); ++k) {
        CHECK(r.mu_trace[k] >= r.mu_trace[k - 1]);
        CHECK(r.mu_trace[k] <= o.mu_max);
    }
    CHECK(r.mu_trace.back() == o.mu_max);
}

TEST_CASE("final lagrangian does not exceed its value at the zero start") {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Matrix x = low_rank(12, 9, 2, 60 + 3 * s, 1.0) + random_matrix(12, 9, 62 + 3 * s, 0.1);
        const LrrProblem p{x, x, 0.3};
        const auto r = solve_lrr(p);
        LrrState zero = zero_state(p, r.state.mu);
        CHECK(lagrangian(p, r.state) <= lagrangian(p, zero));
    }
}

TEST_CASE("converged results satisfy the tolerance and repeat bit for bit") {
    const Matrix x = low_rank(9, 11, 3, 70, 2.0) + random_matrix(9, 11, 72, 0.01);
    const auto a = solve_lrr({x, x, 0.5});
    const auto b = solve_lrr({x, x, 0.5});
    CHECK(a.z_star == b.z_star);
    CHECK(a.e_star == b.e_star);
    CHECK(a.iterations == b.iterations);
    if (a.converged) {
        CHECK(a.residual_data < 1e-6);
        CHECK(a.residual_constraint < 1e-6);
    }
}

TEST_CASE("iteration cap is reported, not thrown") {
    const Matrix x = low_rank(6, 6, 2, 80, 1.0);
    AlmOpts o;
    o.max_iter = 3;
    const auto r = solve_lrr({x, x, 0.3}, o);
    CHECK(!r.converged);
    CHECK(r.iterations == 3);
}

TEST_CASE("lrr input validation") {
    CHECK_THROWS_AS(solve_lrr({Matrix(3, 2), Matrix(4, 2), 0.3}), Error);
    CHECK_THROWS_AS(solve_lrr({Matrix(3, 2), Matrix(3, 2), 0.0}), Error);
    AlmOpts o;
    o.rho = 1.0;
    CHECK_THROWS_AS(solve_lrr({Matrix(3, 2), Matrix(3, 2), 0.3}, o), Error);
}

TEST_CASE("diagnostic dump") {
    const Matrix x = Matrix::identity(3) * 5.0;
    const auto r = solve_lrr({x, x, 0.3});
    std::stringstream z, e, t;
    write_diagnostics(z, e, t, r);
    CHECK(read_csv(z) == r.z_star);
    CHECK(read_csv(e) == r.e_star);
    std::string header;
    std::getline(t, header);
    CHECK(header == "iter,mu,residual_data,residual_constraint");
}

TEST_CASE("mrcl keeps clean low rank features") {
    const Matrix f = transpose(low_rank(16, 40, 2, 90, 1.0));  // 40 samples x 16 features
    const Matrix normalized = f * (1.0 / std::sqrt(dot(f, f) / 40.0));
    REQUIRE(certificate(transpose(normalized)) <= 0.3);
    MrclOpts o;
    o.batch_size = 0;
    CHECK(rel_frobenius(mrcl_transform(f, 0.3, o), f) < 1e-4);
}

TEST_CASE("mrcl keeps identical samples identical") {
    Matrix f(2, 5);
    for (std::size_t k = 0; k < 5; ++k) f(0, k) = f(1, k) = 1.0 + static_cast<double>(k);
    const Matrix out = mrcl_transform(f, 0.3);
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(out(0, k) - out(1, k)) <= 1e-12 * std::abs(out(0, k)));
}

TEST_CASE("mrcl pulls an outlier toward the clean subspace") {
    const Matrix basis = random_matrix(16, 2, 100);
    Matrix f = transpose(matmul(basis, random_matrix(2, 30, 101)));
    Rng rng(102);
    for (std::size_t k = 0; k < 16; ++k) f(7, k) += 3.0 * rng.normal();
    MrclOpts o;
    o.batch_size = 0;
    const Matrix out = mrcl_transform(f, 0.3, o);
    const Eigen::MatrixXd b = to_eigen(basis);
    const double before = distance_to_span(to_eigen(f).row(7).transpose(), b);
    const double after = distance_to_span(to_eigen(out).row(7).transpose(), b);
    CHECK(after < before);
}

TEST_CASE("mrcl over a dictionary") {
    const Matrix dict = transpose(low_rank(12, 30, 2, 110, 1.0));
    const Matrix fresh = transpose(matmul(transpose(dict), random_matrix(30, 8, 112, 0.05)));
    const auto r = mrcl_transform_detailed(fresh, dict, 3.0);
    CHECK(r.unconverged_batches == 0);
    CHECK(rel_frobenius(r.output, fresh) < 1e-3);
    CHECK_THROWS_AS(mrcl_transform_detailed(fresh, Matrix(5, 3), 0.3), Error);
}

TEST_CASE("mrcl chunking and input checks") {
    const Matrix f = transpose(low_rank(6, 25, 2, 120, 1.0));
    MrclOpts o;
    o.batch_size = 10;
    const auto r = mrcl_transform_detailed(f, 0.3, o);
    CHECK(r.batches == 3);
    CHECK(r.output.rows() == 25);
    CHECK_THROWS_AS(mrcl_transform(Matrix(1, 4, 1.0), 0.3), Error);
}

TEST_CASE("affinity of simple representations") {
    CHECK(lrr_affinity(Matrix::identity(3)) == Matrix::identity(3));
    const Matrix z = Matrix::from_rows({{0, 2}, {-2, 0}});
    CHECK(lrr_affinity(z) == Matrix::from_rows({{0, 2}, {2, 0}}));
    CHECK_THROWS_AS(lrr_affinity(Matrix(2, 3)), Error);
}

TEST_CASE("two independent subspaces give a block diagonal affinity") {
    Matrix x(20, 16);
    for (std::size_t s = 0; s < 2; ++s) {
        const Matrix block = low_rank(20, 8, 2, 130 + 5 * s, 1.0);
        for (std::size_t i = 0; i < 20; ++i)
            for (std::size_t j = 0; j < 8; ++j) x(i, s * 8 + j) = block(i, j);
    }
    x *= 2.0 * certificate(x) / 0.3;
    const auto r = solve_lrr({x, x, 0.3});
    const Matrix w = lrr_affinity(r.z_star);
    double total = 0.0, off = 0.0;
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) {
            total += w(i, j);
            if ((i < 8) != (j < 8)) off += w(i, j);
        }
    CHECK(off < 0.05 * total);
}
