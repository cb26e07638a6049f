#include "m2dl/lrr.hpp"

#include "m2dl/error.hpp"
#include "m2dl/log.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace m2dl::lrr {

void validate(const LrrProblem& problem) {
    if (problem.x.rows() != problem.a.rows())
        throw Error(Errc::DimensionMismatch, "lrr: X has " + std::to_string(problem.x.rows()) +
                                                 " rows, dictionary has " + std::to_string(problem.a.rows()));
    if (!(problem.lambda > 0.0) || !std::isfinite(problem.lambda))
        throw Error(Errc::InvalidArgument, "lrr: lambda must be positive");
    require_finite(problem.x, "lrr X");
    require_finite(problem.a, "lrr dictionary");
}

LrrState zero_state(const LrrProblem& problem, double mu) {
    const std::size_t d = problem.x.rows(), n = problem.x.cols(), m = problem.a.cols();
    return LrrState{Matrix(m, n), Matrix(d, n), Matrix(m, n), Matrix(d, n), Matrix(m, n), mu, 0};
}

double lagrangian(const LrrProblem& problem, const LrrState& s, prox::ShrinkAxis axis) {
    const Matrix data_gap = problem.x - matmul(problem.a, s.z) - s.e;
    const Matrix cons_gap = s.z - s.j;
    return nuclear_norm(s.j) + problem.lambda * prox::l21_norm(s.e, axis) + dot(s.y1, data_gap) +
           dot(s.y2, cons_gap) + 0.5 * s.mu * (dot(data_gap, data_gap) + dot(cons_gap, cons_gap));
}

LrrResult solve_lrr(const LrrProblem& problem, const AlmOpts& opts) {
    validate(problem);
    if (!(opts.tol > 0.0) || !(opts.mu0 > 0.0) || !(opts.rho > 1.0) || !(opts.mu_max >= opts.mu0))
        throw Error(Errc::InvalidArgument, "lrr: need tol > 0, mu0 > 0, rho > 1, mu_max >= mu0");

    const Matrix& x = problem.x;
    const Matrix& a = problem.a;
    Matrix gram = matmul_tn(a, a);
    for (std::size_t i = 0; i < gram.rows(); ++i) gram(i, i) += 1.0;
    const CholeskyFactor inv_gram(gram);
    const Matrix atx = matmul_tn(a, x);

    LrrResult res;
    LrrState s = zero_state(problem, opts.mu0);
    for (std::size_t iter = 1; iter <= opts.max_iter; ++iter) {
        const double inv_mu = 1.0 / s.mu;
        s.j = prox::svt(s.z + inv_mu * s.y2, inv_mu);

        Matrix rhs = atx - matmul_tn(a, s.e) + s.j + inv_mu * (matmul_tn(a, s.y1) - s.y2);
        s.z = inv_gram.solve(rhs);

        const Matrix xmaz = x - matmul(a, s.z);
        s.e = prox::l21_shrink(xmaz + inv_mu * s.y1, problem.lambda * inv_mu, opts.error_axis);

        const Matrix gap_data = xmaz - s.e;
        const Matrix gap_cons = s.z - s.j;
        res.residual_data = max_abs(gap_data);
        res.residual_constraint = max_abs(gap_cons);
        res.residual_data_trace.push_back(res.residual_data);
        res.residual_constraint_trace.push_back(res.residual_constraint);
        res.mu_trace.push_back(s.mu);
        s.iter = iter;
        res.iterations = iter;

        if (!std::isfinite(res.residual_data) || !std::isfinite(res.residual_constraint))
            throw Error(Errc::NonFinite, "lrr diverged at iteration " + std::to_string(iter));
        if (res.residual_data < opts.tol && res.residual_constraint < opts.tol) {
            res.converged = true;
            break;
        }
        s.y1 += s.mu * gap_data;
        s.y2 += s.mu * gap_cons;
        s.mu = std::min(opts.rho * s.mu, opts.mu_max);
    }
    res.z_star = s.z;
    res.e_star = s.e;
    res.state = std::move(s);
    return res;
}

namespace {

Matrix columns_of(const Matrix& rows, std::size_t begin, std::size_t end) {
    Matrix x(rows.cols(), end - begin);
    for (std::size_t i = begin; i < end; ++i)
        for (std::size_t k = 0; k < rows.cols(); ++k) x(k, i - begin) = rows(i, k);
    return x;
}

double rms_column_norm(const Matrix& x) { return std::sqrt(dot(x, x) / static_cast<double>(x.cols())); }

// dictionary == nullptr: every chunk is its own dictionary.
MrclResult mrcl_impl(const Matrix& features, const Matrix* dictionary, double lambda, const MrclOpts& opts) {
    const std::size_t n = features.rows();
    if (n < (dictionary ? 1u : 2u)) throw Error(Errc::InvalidArgument, "mrcl_transform: need at least 2 samples");
    require_finite(features, "mrcl_transform input");

    Matrix a;
    double dict_scale = 1.0;
    if (dictionary) {
        if (dictionary->cols() != features.cols() || dictionary->rows() == 0)
            throw Error(Errc::DimensionMismatch, "mrcl_transform: dictionary has " +
                                                     std::to_string(dictionary->cols()) + " features, input " +
                                                     std::to_string(features.cols()));
        require_finite(*dictionary, "mrcl_transform dictionary");
        a = columns_of(*dictionary, 0, dictionary->rows());
        if (opts.normalize && max_abs(a) > 0.0) dict_scale = rms_column_norm(a);
        a *= 1.0 / dict_scale;
    }

    const std::size_t per = opts.batch_size == 0 ? n : std::max<std::size_t>(2, opts.batch_size);
    std::size_t chunks = std::max<std::size_t>(1, (n + per / 2) / per);
    while (chunks > 1 && n / chunks < 2) --chunks;

    MrclResult out;
    out.output = features;
    out.batches = chunks;
    for (std::size_t c = 0; c < chunks; ++c) {
        const std::size_t begin = c * n / chunks, end = (c + 1) * n / chunks;
        Matrix x = columns_of(features, begin, end);  // columns are samples
        if (max_abs(x) == 0.0 && !dictionary) continue;  // all-zero chunk is its own reconstruction

        double scale = dict_scale;
        if (!dictionary && opts.normalize) scale = rms_column_norm(x);
        x *= 1.0 / scale;

        const LrrResult r = solve_lrr(LrrProblem{x, dictionary ? a : x, lambda}, opts.alm);
        out.total_iterations += r.iterations;
        if (!r.converged) {
            ++out.unconverged_batches;
            log_warn("mrcl_transform: LRR did not converge in " + std::to_string(r.iterations) +
                     " iterations (residuals " + format_double(r.residual_data) + ", " +
                     format_double(r.residual_constraint) + "); passing batch through");
            continue;
        }
        const Matrix recon = matmul(dictionary ? a : x, r.z_star);
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t k = 0; k < features.cols(); ++k) out.output(i, k) = scale * recon(k, i - begin);
    }
    return out;
}

}  // namespace

MrclResult mrcl_transform_detailed(const Matrix& features, double lambda, const MrclOpts& opts) {
    return mrcl_impl(features, nullptr, lambda, opts);
}

MrclResult mrcl_transform_detailed(const Matrix& features, const Matrix& dictionary, double lambda,
                                   const MrclOpts& opts) {
    return mrcl_impl(features, &dictionary, lambda, opts);
}

Matrix mrcl_transform(const Matrix& features, double lambda, const MrclOpts& opts) {
    return mrcl_transform_detailed(features, lambda, opts).output;
}

Matrix lrr_affinity(const Matrix& z) {
    if (z.rows() != z.cols())
        throw Error(Errc::DimensionMismatch, "lrr_affinity: Z is " + std::to_string(z.rows()) + "x" +
                                                 std::to_string(z.cols()));
    Matrix w(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) w(i, j) = 0.5 * (std::abs(z(i, j)) + std::abs(z(j, i)));
    return w;
}

void write_diagnostics(std::ostream& z_out, std::ostream& e_out, std::ostream& trace_out,
                       const LrrResult& result) {
    write_csv(z_out, result.z_star);
    write_csv(e_out, result.e_star);
    trace_out << "iter,mu,residual_data,residual_constraint\n";
    for (std::size_t k = 0; k < result.mu_trace.size(); ++k)
        trace_out << (k + 1) << ',' << format_double(result.mu_trace[k]) << ','
                  << format_double(result.residual_data_trace[k]) << ','
                  << format_double(result.residual_constraint_trace[k]) << '\n';
}

}  // namespace m2dl::lrr
