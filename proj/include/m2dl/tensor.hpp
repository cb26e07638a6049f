#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace m2dl {

// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> values);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Activations and kernels of the CNN, index order (n, c, h, w).
struct Tensor4 {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : n(n), c(c), h(h), w(w), data(n * c * h * w, fill) {}

    std::size_t sample_size() const noexcept { return c * h * w; }
    std::size_t index(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const noexcept {
        return ((in * c + ic) * h + ih) * w + iw;
    }
    double& at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) noexcept {
        return data[index(in, ic, ih, iw)];
    }
    double at(std::size_t in, std::size_t ic, std::size_t ih, std::size_t iw) const noexcept {
        return data[index(in, ic, ih, iw)];
    }
    std::span<double> sample(std::size_t in) noexcept {
        return {data.data() + in * sample_size(), sample_size()};
    }
    std::span<const double> sample(std::size_t in) const noexcept {
        return {data.data() + in * sample_size(), sample_size()};
    }

    bool operator==(const Tensor4&) const = default;
};

struct SvdResult {
    Matrix u;               // m x k
    std::vector<double> s;  // k, nonincreasing, nonnegative
    Matrix vt;              // k x n
};

// Products. All are pure and use a fixed summation order.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a b^T
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);
double dot(const Matrix& a, const Matrix& b);  // <a, b>_F
bool all_finite(const Matrix& a);
void require_finite(const Matrix& a, const char* what);

// k = min(rows, cols) singular triplets.
SvdResult thin_svd(const Matrix& a);
double nuclear_norm(const Matrix& a);
double spectral_norm(const Matrix& a);
Matrix reconstruct(const SvdResult& svd);

// Cholesky factor of a symmetric positive definite matrix, reusable across
// right-hand sides.
class CholeskyFactor {
public:
    explicit CholeskyFactor(const Matrix& spd);
    Matrix solve(const Matrix& rhs) const;
    std::size_t dim() const noexcept { return lower_.rows(); }

private:
    Matrix lower_;
};

Matrix solve_spd(const Matrix& a, const Matrix& b);

// CSV interchange: one row per line, ',' separator, %.17g.
void write_csv(std::ostream& out, const Matrix& m);
void write_csv(const std::string& path, const Matrix& m);
Matrix read_csv(std::istream& in);
Matrix read_csv(const std::string& path);

std::string format_double(double v);

// FNV-1a over the bit patterns of the values; chains through `seed`.
std::uint64_t fnv1a(std::span<const double> values, std::uint64_t seed = 14695981039346656037ULL);

}  // namespace m2dl
