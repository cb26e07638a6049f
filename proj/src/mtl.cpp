#include "m2dl/mtl.hpp"

#include "m2dl/bundle.hpp"
#include "m2dl/error.hpp"
#include "m2dl/prox.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace m2dl::mtl {

std::string_view penalty_name(Penalty p) noexcept {
    switch (p) {
        case Penalty::Trace: return "LeastTrace";
        case Penalty::L21: return "LeastL21";
        case Penalty::Lasso: return "LeastLasso";
        case Penalty::SparseTrace: return "LeastSparseTrace";
    }
    return "?";
}

Penalty parse_penalty(std::string_view name) {
    for (Penalty p : kAllPenalties)
        if (penalty_name(p) == name) return p;
    throw Error(Errc::InvalidArgument, "unknown penalty '" + std::string(name) + "'");
}

void validate(const SolverOpts& opts) {
    auto nonneg = [](double v, const char* what) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw Error(Errc::InvalidArgument, std::string(what) + " must be finite and >= 0");
    };
    nonneg(opts.rho1, "rho1");
    nonneg(opts.rho_l2, "rho_l2");
    nonneg(opts.gamma, "gamma");
    if (opts.tau) nonneg(*opts.tau, "tau");
    if (!(opts.tol > 0.0)) throw Error(Errc::InvalidArgument, "tol must be > 0");
    if (opts.max_iter < 1) throw Error(Errc::InvalidArgument, "max_iter must be >= 1");
    if (!(opts.step_init > 0.0)) throw Error(Errc::InvalidArgument, "step_init must be > 0");
}

ColumnScaler ColumnScaler::fit(const Matrix& m) {
    ColumnScaler s;
    s.mean.assign(m.cols(), 0.0);
    s.scale.assign(m.cols(), 1.0);
    if (m.rows() == 0) return s;
    const double n = static_cast<double>(m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) sum += m(i, j);
        const double mu = sum / n;
        double sq = 0.0;
        for (std::size_t i = 0; i < m.rows(); ++i) sq += (m(i, j) - mu) * (m(i, j) - mu);
        const double sd = std::sqrt(sq / n);
        s.mean[j] = mu;
        s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
}

Matrix ColumnScaler::apply(const Matrix& m) const {
    if (m.cols() != mean.size())
        throw Error(Errc::DimensionMismatch, "ColumnScaler::apply: width " + std::to_string(m.cols()) +
                                                 ", fitted " + std::to_string(mean.size()));
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - mean[j]) / scale[j];
    return out;
}

Matrix ColumnScaler::invert(const Matrix& m) const {
    if (m.cols() != mean.size())
        throw Error(Errc::DimensionMismatch, "ColumnScaler::invert: width mismatch");
    Matrix out = m;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j) * scale[j] + mean[j];
    return out;
}

namespace {

struct Dims {
    std::size_t d1 = 0, d2 = 0, tasks = 0;
};

Dims check_tasks(const std::vector<TaskDataset>& tasks) {
    if (tasks.empty()) throw Error(Errc::InvalidArgument, "no tasks");
    Dims d{tasks.front().x.cols(), tasks.front().y.cols(), tasks.size()};
    for (const auto& t : tasks) {
        if (t.x.rows() != t.y.rows())
            throw Error(Errc::DimensionMismatch, "task " + std::to_string(t.task_id) + ": " +
                                                     std::to_string(t.x.rows()) + " feature rows vs " +
                                                     std::to_string(t.y.rows()) + " target rows");
        if (t.x.cols() != d.d1 || t.y.cols() != d.d2)
            throw Error(Errc::DimensionMismatch,
                        "task " + std::to_string(t.task_id) + " does not share d1/d2 with the first task");
        require_finite(t.x, "task features");
        require_finite(t.y, "task targets");
    }
    return d;
}

Matrix block(const Matrix& w, std::size_t v, std::size_t d2) {
    Matrix b(w.rows(), d2);
    for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j < d2; ++j) b(i, j) = w(i, v * d2 + j);
    return b;
}

void set_block(Matrix& w, std::size_t v, const Matrix& b) {
    for (std::size_t i = 0; i < b.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) w(i, v * b.cols() + j) = b(i, j);
}

void check_model_dims(const std::vector<TaskDataset>& tasks, const Matrix& w) {
    const Dims d = check_tasks(tasks);
    if (w.rows() != d.d1 || w.cols() != d.tasks * d.d2)
        throw Error(Errc::DimensionMismatch, "W is " + std::to_string(w.rows()) + "x" +
                                                 std::to_string(w.cols()) + ", tasks need " +
                                                 std::to_string(d.d1) + "x" +
                                                 std::to_string(d.tasks * d.d2));
}

// Loss and gradient of the least-squares part, sum_v 0.5 ||X_v W_v - Y_v||^2.
double loss_and_grad(const std::vector<TaskDataset>& tasks, const Matrix& w, std::size_t d2,
                     Matrix* grad) {
    double loss = 0.0;
    if (grad) *grad = Matrix(w.rows(), w.cols());
    for (std::size_t v = 0; v < tasks.size(); ++v) {
        const Matrix residual = matmul(tasks[v].x, block(w, v, d2)) - tasks[v].y;
        loss += 0.5 * dot(residual, residual);
        if (grad) set_block(*grad, v, matmul_tn(tasks[v].x, residual));
    }
    return loss;
}

// Composite problem over one or more additive blocks: W = sum of blocks,
// F = f(W) + g(blocks) with f smooth and g prox-friendly.
struct Composite {
    double rho_l2 = 0.0;  // adds rho_l2 * ||W||_F^2 to f
    std::function<std::vector<Matrix>(const std::vector<Matrix>&, double step)> prox;
    std::function<double(const std::vector<Matrix>&)> nonsmooth;
};

Matrix combine(const std::vector<Matrix>& blocks) {
    Matrix w = blocks.front();
    for (std::size_t i = 1; i < blocks.size(); ++i) w += blocks[i];
    return w;
}

struct FistaResult {
    std::vector<Matrix> blocks;
    std::vector<double> trace;
    std::vector<double> q_nuclear;
    std::size_t iterations = 0;
    bool converged = false;
};

FistaResult fista(const std::vector<TaskDataset>& tasks, const Dims& dims, const Composite& problem,
                  std::size_t num_blocks, const SolverOpts& opts, bool track_q) {
    auto smooth = [&](const Matrix& w, Matrix* grad) {
        double f = loss_and_grad(tasks, w, dims.d2, grad);
        if (problem.rho_l2 > 0.0) {
            f += problem.rho_l2 * dot(w, w);
            if (grad) *grad += (2.0 * problem.rho_l2) * w;
        }
        return f;
    };
    auto total = [&](const std::vector<Matrix>& b) { return smooth(combine(b), nullptr) + problem.nonsmooth(b); };

    FistaResult res;
    std::vector<Matrix> x(num_blocks, Matrix(dims.d1, dims.tasks * dims.d2));
    std::vector<Matrix> x_prev = x;
    double fx = total(x);
    res.trace.push_back(fx);
    if (track_q) res.q_nuclear.push_back(0.0);

    double lipschitz = 1.0 / opts.step_init;
    double t = 1.0, t_prev = 1.0;

    // One backtracked proximal-gradient step from `s`.
    auto prox_step = [&](const std::vector<Matrix>& s, std::size_t iter) {
        Matrix grad;
        const double fs = smooth(combine(s), &grad);
        if (!all_finite(grad) || !std::isfinite(fs))
            throw Error(Errc::NonFinite, "gradient at iteration " + std::to_string(iter));
        while (true) {
            std::vector<Matrix> trial = s;
            for (auto& b : trial) b -= (1.0 / lipschitz) * grad;
            std::vector<Matrix> z = problem.prox(trial, 1.0 / lipschitz);
            const double fz = smooth(combine(z), nullptr);
            double r_sum = 0.0, lin = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                const Matrix delta = z[i] - s[i];
                r_sum += dot(delta, delta);
                lin += dot(grad, delta);
            }
            if (r_sum <= 1e-20) return z;
            const double l_sum = fz - fs - lin;
            if (l_sum <= 0.5 * lipschitz * r_sum * (1.0 + 1e-12)) return z;
            lipschitz = std::max(2.0 * lipschitz, l_sum / r_sum);
            if (!std::isfinite(lipschitz))
                throw Error(Errc::NonFinite, "step size collapsed at iteration " + std::to_string(iter));
        }
    };

    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        const double beta = (t_prev - 1.0) / t;
        std::vector<Matrix> s = x;
        if (beta != 0.0)
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += beta * (x[i] - x_prev[i]);

        std::vector<Matrix> z = prox_step(s, iter);
        double fz = total(z);
        if (fz > fx) {
            // Momentum overshot: restart from the current iterate with a plain step.
            t = t_prev = 1.0;
            z = prox_step(x, iter);
            fz = total(z);
            if (fz > fx) {
                res.converged = true;
                break;
            }
        }
        res.iterations = iter;
        const double change = fx - fz;
        x_prev = std::move(x);
        x = std::move(z);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        t_prev = t;
        t = t_next;
        res.trace.push_back(fz);
        if (track_q) res.q_nuclear.push_back(nuclear_norm(x.back()));
        const double prev = fx;
        fx = fz;
        if (prev == 0.0 || change <= opts.tol * std::abs(prev)) {
            res.converged = true;
            break;
        }
    }
    res.blocks = std::move(x);
    return res;
}

struct Prepared {
    std::vector<TaskDataset> tasks;
    std::vector<ColumnScaler> x_scalers, y_scalers;
};

Prepared prepare(const std::vector<TaskDataset>& tasks, const SolverOpts& opts) {
    Prepared p{tasks, {}, {}};
    if (!opts.standardize) return p;
    for (auto& t : p.tasks) {
        p.x_scalers.push_back(ColumnScaler::fit(t.x));
        p.y_scalers.push_back(ColumnScaler::fit(t.y));
        t.x = p.x_scalers.back().apply(t.x);
        t.y = p.y_scalers.back().apply(t.y);
    }
    return p;
}

MtlModel run(const std::vector<TaskDataset>& raw, Penalty penalty, const SolverOpts& opts_in) {
    validate(opts_in);
    check_tasks(raw);
    Prepared prep = prepare(raw, opts_in);
    const auto& tasks = prep.tasks;
    const Dims dims = check_tasks(tasks);
    SolverOpts opts = opts_in;

    Composite problem;
    std::size_t num_blocks = 1;
    switch (penalty) {
        case Penalty::Trace:
            problem.prox = [&](const std::vector<Matrix>& v, double step) {
                return std::vector<Matrix>{prox::svt(v[0], step * opts.rho1)};
            };
            problem.nonsmooth = [&](const std::vector<Matrix>& b) {
                return opts.rho1 > 0.0 ? opts.rho1 * nuclear_norm(b[0]) : 0.0;
            };
            break;
        case Penalty::L21:
            problem.rho_l2 = opts.rho_l2;
            problem.prox = [&](const std::vector<Matrix>& v, double step) {
                return std::vector<Matrix>{prox::l21_shrink(v[0], step * opts.rho1, prox::ShrinkAxis::Rows)};
            };
            problem.nonsmooth = [&](const std::vector<Matrix>& b) {
                return opts.rho1 * prox::l21_norm(b[0], prox::ShrinkAxis::Rows);
            };
            break;
        case Penalty::Lasso:
            problem.rho_l2 = opts.rho_l2;
            problem.prox = [&](const std::vector<Matrix>& v, double step) {
                return std::vector<Matrix>{prox::soft_threshold(v[0], step * opts.rho1)};
            };
            problem.nonsmooth = [&](const std::vector<Matrix>& b) { return opts.rho1 * prox::l1_norm(b[0]); };
            break;
        case Penalty::SparseTrace:
            if (!opts.tau) opts.tau = 0.5 * nuclear_norm(ridge_weights(tasks));
            num_blocks = 2;
            problem.prox = [&](const std::vector<Matrix>& v, double step) {
                return std::vector<Matrix>{prox::soft_threshold(v[0], step * opts.gamma),
                                           prox::project_trace_ball(v[1], *opts.tau)};
            };
            problem.nonsmooth = [&](const std::vector<Matrix>& b) { return opts.gamma * prox::l1_norm(b[0]); };
            break;
    }

    FistaResult fr = fista(tasks, dims, problem, num_blocks, opts, penalty == Penalty::SparseTrace);

    MtlModel model;
    model.penalty = penalty;
    model.opts = opts;
    model.d1 = dims.d1;
    model.d2 = dims.d2;
    for (const auto& t : tasks) model.task_ids.push_back(t.task_id);
    model.w = combine(fr.blocks);
    if (penalty == Penalty::SparseTrace) {
        model.p = fr.blocks[0];
        model.q = fr.blocks[1];
    }
    model.objective_trace = std::move(fr.trace);
    model.q_nuclear_trace = std::move(fr.q_nuclear);
    model.iterations = fr.iterations;
    model.converged = fr.converged;
    model.x_scalers = std::move(prep.x_scalers);
    model.y_scalers = std::move(prep.y_scalers);
    require_finite(model.w, "solver output");
    return model;
}

}  // namespace

Matrix MtlModel::task_weights(std::size_t task_index) const {
    if (task_index >= num_tasks())
        throw Error(Errc::UnknownTask, "task index " + std::to_string(task_index));
    return block(w, task_index, d2);
}

double least_squares_loss(const std::vector<TaskDataset>& tasks, const Matrix& w) {
    check_model_dims(tasks, w);
    return loss_and_grad(tasks, w, tasks.front().y.cols(), nullptr);
}

double objective(const std::vector<TaskDataset>& tasks, const MtlModel& model, Penalty penalty,
                 const SolverOpts& opts) {
    const double loss = least_squares_loss(tasks, model.w);
    switch (penalty) {
        case Penalty::Trace: return loss + opts.rho1 * nuclear_norm(model.w);
        case Penalty::L21:
            return loss + opts.rho_l2 * dot(model.w, model.w) +
                   opts.rho1 * prox::l21_norm(model.w, prox::ShrinkAxis::Rows);
        case Penalty::Lasso:
            return loss + opts.rho_l2 * dot(model.w, model.w) + opts.rho1 * prox::l1_norm(model.w);
        case Penalty::SparseTrace: {
            // Without a stored split the whole of W is treated as the sparse part.
            const Matrix& p = model.p.empty() ? model.w : model.p;
            if (p.rows() != model.w.rows() || p.cols() != model.w.cols())
                throw Error(Errc::DimensionMismatch, "P does not match W");
            return loss + opts.gamma * prox::l1_norm(p);
        }
    }
    return loss;
}

MtlModel solve_least_trace(const std::vector<TaskDataset>& tasks, const SolverOpts& opts) {
    return run(tasks, Penalty::Trace, opts);
}
MtlModel solve_least_l21(const std::vector<TaskDataset>& tasks, const SolverOpts& opts) {
    return run(tasks, Penalty::L21, opts);
}
MtlModel solve_least_lasso(const std::vector<TaskDataset>& tasks, const SolverOpts& opts) {
    return run(tasks, Penalty::Lasso, opts);
}
MtlModel solve_least_sparse_trace(const std::vector<TaskDataset>& tasks, const SolverOpts& opts) {
    return run(tasks, Penalty::SparseTrace, opts);
}
MtlModel solve(const std::vector<TaskDataset>& tasks, Penalty penalty, const SolverOpts& opts) {
    return run(tasks, penalty, opts);
}

Matrix ridge_weights(const std::vector<TaskDataset>& tasks) {
    const Dims d = check_tasks(tasks);
    Matrix w(d.d1, d.tasks * d.d2);
    for (std::size_t v = 0; v < tasks.size(); ++v) {
        Matrix gram = matmul_tn(tasks[v].x, tasks[v].x);
        for (std::size_t i = 0; i < d.d1; ++i) gram(i, i) += 1.0;
        set_block(w, v, solve_spd(gram, matmul_tn(tasks[v].x, tasks[v].y)));
    }
    return w;
}

Matrix predict(const MtlModel& model, const Matrix& x, std::size_t task_id) {
    const auto it = std::find(model.task_ids.begin(), model.task_ids.end(), task_id);
    if (it == model.task_ids.end())
        throw Error(Errc::UnknownTask, "model has no task " + std::to_string(task_id));
    if (x.cols() != model.d1)
        throw Error(Errc::DimensionMismatch, "predict: " + std::to_string(x.cols()) +
                                                 " features, model expects " + std::to_string(model.d1));
    const auto v = static_cast<std::size_t>(it - model.task_ids.begin());
    if (model.x_scalers.empty()) return matmul(x, model.task_weights(v));
    return model.y_scalers[v].invert(matmul(model.x_scalers[v].apply(x), model.task_weights(v)));
}

void save_model(std::ostream& out, const MtlModel& model) {
    BundleWriter w(out, "m2dl-mtl-model", 1);
    w.put("penalty", penalty_name(model.penalty));
    w.put("d1", model.d1);
    w.put("d2", model.d2);
    std::ostringstream ids;
    for (std::size_t i = 0; i < model.task_ids.size(); ++i) ids << (i ? " " : "") << model.task_ids[i];
    w.put("task_ids", ids.str());
    w.put("rho1", model.opts.rho1);
    w.put("rho_l2", model.opts.rho_l2);
    w.put("gamma", model.opts.gamma);
    w.put("tau", model.opts.tau ? format_double(*model.opts.tau) : std::string("auto"));
    w.put("max_iter", model.opts.max_iter);
    w.put("tol", model.opts.tol);
    w.put("step_init", model.opts.step_init);
    w.put("standardize", std::string(model.opts.standardize ? "1" : "0"));
    w.put("iterations", model.iterations);
    w.put("converged", std::string(model.converged ? "1" : "0"));
    w.put_matrix("w", model.w);
    w.put_matrix("p", model.p);
    w.put_matrix("q", model.q);
    w.put_vector("objective_trace", model.objective_trace);
    w.put_vector("q_nuclear_trace", model.q_nuclear_trace);
    w.put("scalers", model.x_scalers.size());
    for (std::size_t v = 0; v < model.x_scalers.size(); ++v) {
        w.put_vector("x_mean", model.x_scalers[v].mean);
        w.put_vector("x_scale", model.x_scalers[v].scale);
        w.put_vector("y_mean", model.y_scalers[v].mean);
        w.put_vector("y_scale", model.y_scalers[v].scale);
    }
}

void save_model(const std::string& path, const MtlModel& model) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot open " + path + " for writing");
    save_model(out, model);
}

MtlModel load_model(std::istream& in) {
    BundleReader r(in, "m2dl-mtl-model", 1);
    MtlModel m;
    m.penalty = parse_penalty(r.get("penalty"));
    m.d1 = r.get_size("d1");
    m.d2 = r.get_size("d2");
    std::istringstream ids(r.get("task_ids"));
    for (std::size_t id; ids >> id;) m.task_ids.push_back(id);
    m.opts.rho1 = r.get_double("rho1");
    m.opts.rho_l2 = r.get_double("rho_l2");
    m.opts.gamma = r.get_double("gamma");
    const std::string tau = r.get("tau");
    if (tau != "auto") m.opts.tau = std::strtod(tau.c_str(), nullptr);
    m.opts.max_iter = r.get_size("max_iter");
    m.opts.tol = r.get_double("tol");
    m.opts.step_init = r.get_double("step_init");
    m.opts.standardize = r.get("standardize") == "1";
    m.iterations = r.get_size("iterations");
    m.converged = r.get("converged") == "1";
    m.w = r.get_matrix("w");
    m.p = r.get_matrix("p");
    m.q = r.get_matrix("q");
    m.objective_trace = r.get_vector("objective_trace");
    m.q_nuclear_trace = r.get_vector("q_nuclear_trace");
    const std::size_t scalers = r.get_size("scalers");
    for (std::size_t v = 0; v < scalers; ++v) {
        ColumnScaler xs, ys;
        xs.mean = r.get_vector("x_mean");
        xs.scale = r.get_vector("x_scale");
        ys.mean = r.get_vector("y_mean");
        ys.scale = r.get_vector("y_scale");
        m.x_scalers.push_back(std::move(xs));
        m.y_scalers.push_back(std::move(ys));
    }
    if (m.w.rows() != m.d1 || m.w.cols() != m.d2 * m.task_ids.size())
        throw Error(Errc::Parse, "model W shape does not match header");
    return m;
}

MtlModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot open " + path);
    return load_model(in);
}

}  // namespace m2dl::mtl
