#pragma once

#include "m2dl/rng.hpp"
#include "m2dl/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace m2dl::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

inline Matrix from_eigen(const Eigen::MatrixXd& e) {
    Matrix m(e.rows(), e.cols());
    for (Eigen::Index i = 0; i < e.rows(); ++i)
        for (Eigen::Index j = 0; j < e.cols(); ++j) m(i, j) = e(i, j);
    return m;
}

// Independent triple loop, used as reference for the BLAS-backed product.
inline Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
    return frobenius_norm(a - b) / std::max(1.0, frobenius_norm(b));
}

// Singular values from the eigenvalues of A^T A (self-adjoint solver).
inline Eigen::VectorXd eigen_singular_values(const Matrix& a) {
    const Eigen::MatrixXd e = to_eigen(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e.transpose() * e);
    return es.eigenvalues().cwiseMax(0.0).cwiseSqrt().reverse();
}

inline double eigen_nuclear(const Matrix& a) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(to_eigen(a)).singularValues().sum();
}

}  // namespace m2dl::test
