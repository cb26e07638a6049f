#pragma once

#include "m2dl/prox.hpp"
#include "m2dl/tensor.hpp"

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace m2dl::lrr {

// min ||Z||_* + lambda ||E||_{2,1}  s.t.  X = A Z + E.
// Samples are the columns of X; A is the dictionary.
struct LrrProblem {
    Matrix x;  // D x N
    Matrix a;  // D x M
    double lambda = 0.3;
};

struct AlmOpts {
    double mu0 = 0.5;
    double rho = 1.1;
    double mu_max = 1e6;
    double tol = 1e-6;
    std::size_t max_iter = 500;
    prox::ShrinkAxis error_axis = prox::ShrinkAxis::Columns;
};

// Iterate of the inexact augmented Lagrange multiplier method.
struct LrrState {
    Matrix z, e, j, y1, y2;
    double mu = 0.0;
    std::size_t iter = 0;
};

struct LrrResult {
    Matrix z_star;
    Matrix e_star;
    double residual_data = 0.0;        // ||X - A Z - E||_inf
    double residual_constraint = 0.0;  // ||Z - J||_inf
    std::size_t iterations = 0;
    bool converged = false;
    LrrState state;
    std::vector<double> mu_trace;
    std::vector<double> residual_data_trace;
    std::vector<double> residual_constraint_trace;
};

void validate(const LrrProblem& problem);

LrrState zero_state(const LrrProblem& problem, double mu);

// Augmented Lagrangian with the nuclear norm carried by J:
// ||J||_* + lambda ||E||_{2,1} + <Y1, X-AZ-E> + <Y2, Z-J>
//   + mu/2 (||X-AZ-E||_F^2 + ||Z-J||_F^2)
double lagrangian(const LrrProblem& problem, const LrrState& state,
                  prox::ShrinkAxis axis = prox::ShrinkAxis::Columns);

// Inexact ALM, update order J -> Z -> E -> multipliers -> mu, zero start.
// Hitting max_iter is reported through `converged`, not thrown.
LrrResult solve_lrr(const LrrProblem& problem, const AlmOpts& opts = {});

struct MrclOpts {
    AlmOpts alm;
    // Samples per LRR solve; 0 solves all samples jointly. Larger inputs are
    // split into contiguous, nearly equal chunks.
    std::size_t batch_size = 0;
    // Rescale so the RMS sample norm is 1 before solving, undone afterwards.
    bool normalize = true;
};

struct MrclResult {
    Matrix output;
    std::size_t batches = 0;
    std::size_t unconverged_batches = 0;
    std::size_t total_iterations = 0;
};

// Manifold regularization of a layer output (N samples x d features): solves
// LRR with the activations as their own dictionary and returns (X Z*)^T, the
// low-rank, corruption-removed reconstruction. A batch whose solve does not
// converge is passed through unchanged with a warning.
MrclResult mrcl_transform_detailed(const Matrix& features, double lambda, const MrclOpts& opts = {});
Matrix mrcl_transform(const Matrix& features, double lambda, const MrclOpts& opts = {});

// Same, but every sample is represented over a fixed dictionary (rows are
// dictionary samples) instead of over its own batch; the output is (A Z*)^T.
// Normalization uses the dictionary's RMS sample norm.
MrclResult mrcl_transform_detailed(const Matrix& features, const Matrix& dictionary, double lambda,
                                   const MrclOpts& opts = {});

// (|Z| + |Z^T|) / 2.
Matrix lrr_affinity(const Matrix& z_star);

// Diagnostic dump: Z*, E* and the per-iteration (mu, residual) trace as CSV.
void write_diagnostics(std::ostream& z_out, std::ostream& e_out, std::ostream& trace_out,
                       const LrrResult& result);

}  // namespace m2dl::lrr
