#include "m2dl/tensor.hpp"

#include "m2dl/error.hpp"

#include <cblas.h>
#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace m2dl {

const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::DimensionMismatch: return "dimension mismatch";
        case Errc::InvalidArgument: return "invalid argument";
        case Errc::NotConverged: return "not converged";
        case Errc::NotPositiveDefinite: return "not positive definite";
        case Errc::NonFinite: return "non-finite value";
        case Errc::UnknownTask: return "unknown task";
        case Errc::Io: return "i/o error";
        case Errc::Parse: return "parse error";
    }
    return "error";
}

namespace {

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw Error(Errc::DimensionMismatch, std::string(op) + ": " + shape(a) + " vs " + shape(b));
}

Matrix gemm(const Matrix& a, bool ta, const Matrix& b, bool tb, const char* op) {
    const std::size_t m = ta ? a.cols() : a.rows();
    const std::size_t k = ta ? a.rows() : a.cols();
    const std::size_t kb = tb ? b.cols() : b.rows();
    const std::size_t n = tb ? b.rows() : b.cols();
    if (k != kb)
        throw Error(Errc::DimensionMismatch, std::string(op) + ": " + shape(a) + " and " + shape(b));
    Matrix c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0,
                a.data().data(), static_cast<int>(a.cols()), b.data().data(),
                static_cast<int>(b.cols()), 0.0, c.data().data(), static_cast<int>(n));
    return c;
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_)
        throw Error(Errc::DimensionMismatch,
                    "Matrix: " + std::to_string(data_.size()) + " values for " +
                        std::to_string(rows_) + "x" + std::to_string(cols_));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> values) {
    Matrix m(values.size(), values.size());
    for (std::size_t i = 0; i < values.size(); ++i) m(i, i) = values[i];
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw Error(Errc::DimensionMismatch, "Matrix::from_rows: ragged rows");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "operator+");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "operator-");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) noexcept {
    for (auto& v : data_) v *= s;
    return *this;
}

Matrix matmul(const Matrix& a, const Matrix& b) { return gemm(a, false, b, false, "matmul"); }
Matrix matmul_tn(const Matrix& a, const Matrix& b) { return gemm(a, true, b, false, "matmul_tn"); }
Matrix matmul_nt(const Matrix& a, const Matrix& b) { return gemm(a, false, b, true, "matmul_nt"); }

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    auto cd = c.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < cd.size(); ++i) cd[i] *= bd[i];
    return c;
}

double frobenius_norm(const Matrix& a) { return std::sqrt(dot(a, a)); }

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double dot(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) s += ad[i] * bd[i];
    return s;
}

bool all_finite(const Matrix& a) {
    return std::all_of(a.data().begin(), a.data().end(), [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& a, const char* what) {
    if (!all_finite(a)) throw Error(Errc::NonFinite, std::string(what) + " contains NaN or Inf");
}

SvdResult thin_svd(const Matrix& a) {
    require_finite(a, "thin_svd input");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    const std::size_t k = std::min(m, n);
    SvdResult out{Matrix(m, k), std::vector<double>(k, 0.0), Matrix(k, n)};
    if (k == 0) return out;

    std::vector<double> work(a.data().begin(), a.data().end());
    lapack_int info = LAPACKE_dgesdd(LAPACK_ROW_MAJOR, 'S', static_cast<lapack_int>(m),
                                     static_cast<lapack_int>(n), work.data(),
                                     static_cast<lapack_int>(n), out.s.data(), out.u.data().data(),
                                     static_cast<lapack_int>(k), out.vt.data().data(),
                                     static_cast<lapack_int>(n));
    if (info > 0) {
        // Divide-and-conquer failed; the QR-iteration driver is slower but more robust.
        std::copy(a.data().begin(), a.data().end(), work.begin());
        std::vector<double> superb(k > 1 ? k - 1 : 1);
        info = LAPACKE_dgesvd(LAPACK_ROW_MAJOR, 'S', 'S', static_cast<lapack_int>(m),
                              static_cast<lapack_int>(n), work.data(), static_cast<lapack_int>(n),
                              out.s.data(), out.u.data().data(), static_cast<lapack_int>(k),
                              out.vt.data().data(), static_cast<lapack_int>(n), superb.data());
    }
    if (info != 0) {
        std::string msg = "thin_svd: LAPACK info=" + std::to_string(info);
        if (info > 0) {
            const Matrix partial = reconstruct(out);
            msg += ", reconstruction residual " +
                   format_double(frobenius_norm(partial - a) / std::max(1.0, frobenius_norm(a)));
        }
        throw Error(info > 0 ? Errc::NotConverged : Errc::InvalidArgument, msg);
    }
    return out;
}

double nuclear_norm(const Matrix& a) {
    double s = 0.0;
    for (double v : thin_svd(a).s) s += v;
    return s;
}

double spectral_norm(const Matrix& a) {
    const auto svd = thin_svd(a);
    return svd.s.empty() ? 0.0 : svd.s.front();
}

Matrix reconstruct(const SvdResult& svd) {
    Matrix us = svd.u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t j = 0; j < us.cols(); ++j) us(i, j) *= svd.s[j];
    return matmul(us, svd.vt);
}

CholeskyFactor::CholeskyFactor(const Matrix& spd) : lower_(spd) {
    const std::size_t n = spd.rows();
    if (spd.cols() != n) throw Error(Errc::DimensionMismatch, "cholesky: non-square " + shape(spd));
    require_finite(spd, "cholesky input");
    const double scale = std::max(1.0, max_abs(spd));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(spd(i, j) - spd(j, i)) > 1e-12 * scale)
                throw Error(Errc::NotPositiveDefinite,
                            "cholesky: matrix not symmetric at (" + std::to_string(i) + "," +
                                std::to_string(j) + ")");
    if (n == 0) return;
    const lapack_int info = LAPACKE_dpotrf(LAPACK_ROW_MAJOR, 'L', static_cast<lapack_int>(n),
                                           lower_.data().data(), static_cast<lapack_int>(n));
    if (info > 0)
        throw Error(Errc::NotPositiveDefinite,
                    "cholesky: leading minor " + std::to_string(info) + " is not positive");
    if (info < 0) throw Error(Errc::InvalidArgument, "cholesky: LAPACK info=" + std::to_string(info));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) lower_(i, j) = 0.0;
}

Matrix CholeskyFactor::solve(const Matrix& rhs) const {
    const std::size_t n = lower_.rows();
    if (rhs.rows() != n)
        throw Error(Errc::DimensionMismatch,
                    "cholesky solve: factor " + shape(lower_) + ", rhs " + shape(rhs));
    Matrix x = rhs;
    if (n == 0 || rhs.cols() == 0) return x;
    const lapack_int info =
        LAPACKE_dpotrs(LAPACK_ROW_MAJOR, 'L', static_cast<lapack_int>(n),
                       static_cast<lapack_int>(rhs.cols()), lower_.data().data(),
                       static_cast<lapack_int>(n), x.data().data(), static_cast<lapack_int>(rhs.cols()));
    if (info != 0) throw Error(Errc::InvalidArgument, "cholesky solve: LAPACK info=" + std::to_string(info));
    return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) { return CholeskyFactor(a).solve(b); }

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint64_t fnv1a(std::span<const double> values, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (double v : values) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &v, sizeof v);
        for (unsigned char b : bytes) {
            h ^= b;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

void write_csv(std::ostream& out, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(m(i, j));
        }
        out << '\n';
    }
}

void write_csv(const std::string& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    write_csv(out, m);
}

Matrix read_csv(std::istream& in) {
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t count = 0;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0')
                throw Error(Errc::Parse, "line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            data.push_back(v);
            ++count;
        }
        if (rows == 0) cols = count;
        else if (count != cols)
            throw Error(Errc::Parse, "line " + std::to_string(lineno) + ": expected " +
                                         std::to_string(cols) + " columns, got " + std::to_string(count));
        ++rows;
    }
    return Matrix(rows, cols, std::move(data));
}

Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return read_csv(in);
}

}  // namespace m2dl
