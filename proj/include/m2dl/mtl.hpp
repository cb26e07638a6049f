#pragma once

#include "m2dl/tensor.hpp"

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace m2dl::mtl {

// Training data of one task: N_v samples, d1 features, d2 targets.
struct TaskDataset {
    std::size_t task_id = 1;
    Matrix x;  // N_v x d1
    Matrix y;  // N_v x d2
};

enum class Penalty { Trace, L21, Lasso, SparseTrace };

// "LeastTrace", "LeastL21", "LeastLasso", "LeastSparseTrace".
std::string_view penalty_name(Penalty p) noexcept;
Penalty parse_penalty(std::string_view name);
inline constexpr Penalty kAllPenalties[] = {Penalty::Trace, Penalty::L21, Penalty::Lasso,
                                            Penalty::SparseTrace};

struct SolverOpts {
    double rho1 = 0.1;
    double rho_l2 = 0.0;
    double gamma = 0.1;
    // Trace-ball radius for LeastSparseTrace; unset means 0.5 * ||W_ridge||_*.
    std::optional<double> tau;
    std::size_t max_iter = 5000;
    double tol = 1e-6;
    double step_init = 1.0;
    // Standardize features and targets per task before solving; the fitted
    // transforms are stored in the model and applied by predict().
    bool standardize = false;
};

void validate(const SolverOpts& opts);

// Per-column affine transform (x - mean) / scale.
struct ColumnScaler {
    std::vector<double> mean;
    std::vector<double> scale;

    static ColumnScaler fit(const Matrix& m);
    Matrix apply(const Matrix& m) const;
    Matrix invert(const Matrix& m) const;
    bool empty() const noexcept { return mean.empty(); }
};

// Stacked regressors: column block v (d2 columns wide) of `w` is w^v.
// For LeastSparseTrace, `p` and `q` hold the sparse and low-rank parts and
// w == p + q exactly; they are empty for the other penalties.
struct MtlModel {
    Penalty penalty = Penalty::SparseTrace;
    SolverOpts opts;
    std::size_t d1 = 0, d2 = 0;
    std::vector<std::size_t> task_ids;
    Matrix w, p, q;
    // Objective after each accepted iterate, starting with W = 0.
    std::vector<double> objective_trace;
    // ||Q||_* after each accepted iterate (LeastSparseTrace only).
    std::vector<double> q_nuclear_trace;
    std::size_t iterations = 0;
    bool converged = false;
    // Filled when opts.standardize, one entry per task.
    std::vector<ColumnScaler> x_scalers, y_scalers;

    std::size_t num_tasks() const noexcept { return task_ids.size(); }
    Matrix task_weights(std::size_t task_index) const;
};

// Sum over tasks of 0.5 * ||Y_v - X_v W_v||_F^2 plus the penalty of the chosen
// variant, evaluated on the tasks exactly as passed.
double objective(const std::vector<TaskDataset>& tasks, const MtlModel& model, Penalty penalty,
                 const SolverOpts& opts);
double least_squares_loss(const std::vector<TaskDataset>& tasks, const Matrix& w);

MtlModel solve_least_trace(const std::vector<TaskDataset>& tasks, const SolverOpts& opts);
MtlModel solve_least_l21(const std::vector<TaskDataset>& tasks, const SolverOpts& opts);
MtlModel solve_least_lasso(const std::vector<TaskDataset>& tasks, const SolverOpts& opts);
MtlModel solve_least_sparse_trace(const std::vector<TaskDataset>& tasks, const SolverOpts& opts);
MtlModel solve(const std::vector<TaskDataset>& tasks, Penalty penalty, const SolverOpts& opts);

// Per-task ridge solution (X_v^T X_v + I)^{-1} X_v^T Y_v, stacked.
Matrix ridge_weights(const std::vector<TaskDataset>& tasks);

// x * W_v for the task with the given id (undoing standardization if the model
// was fitted on standardized data).
Matrix predict(const MtlModel& model, const Matrix& x, std::size_t task_id);

void save_model(std::ostream& out, const MtlModel& model);
void save_model(const std::string& path, const MtlModel& model);
MtlModel load_model(std::istream& in);
MtlModel load_model(const std::string& path);

}  // namespace m2dl::mtl
