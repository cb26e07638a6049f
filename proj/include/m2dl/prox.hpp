#pragma once

#include "m2dl/tensor.hpp"

#include <span>
#include <vector>

namespace m2dl::prox {

// Which slices form the groups of the l2,1 norm.
enum class ShrinkAxis { Rows, Columns };

// Elementwise sign(x) * max(|x| - tau, 0): prox of tau * ||.||_1.
Matrix soft_threshold(const Matrix& m, double tau);

// Group shrinkage g * max(0, 1 - tau / ||g||_2) over rows or columns: prox of
// tau * ||.||_{2,1}. Zero groups stay zero.
Matrix l21_shrink(const Matrix& m, double tau, ShrinkAxis axis);

// Singular value thresholding: prox of tau * ||.||_*.
Matrix svt(const Matrix& m, double tau);

// Euclidean projection onto { Q : ||Q||_* <= tau }.
Matrix project_trace_ball(const Matrix& m, double tau);

// Projection of a nonnegative vector onto { x >= 0, sum(x) <= radius }.
std::vector<double> project_l1_ball(std::span<const double> values, double radius);

double l1_norm(const Matrix& m);
double l21_norm(const Matrix& m, ShrinkAxis axis);

}  // namespace m2dl::prox
