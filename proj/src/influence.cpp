#include "gsr/influence.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>

#include "gsr/error.hpp"

namespace gsr {

std::string_view to_string(InfluenceMethod method) {
    return method == InfluenceMethod::exact ? "exact" : "hessian_free";
}

InfluenceMethod parse_influence_method(std::string_view text) {
    if (text == "exact") return InfluenceMethod::exact;
    if (text == "hessian_free" || text == "hf") return InfluenceMethod::hessian_free;
    throw ValidationError("unknown influence method '" + std::string(text) + "'");
}

void HessianSolveConfig::validate() const {
    if (!(residual_tol > 0.0)) throw ValidationError("residual_tol must be > 0");
    if (max_solve_iters < 1) throw ValidationError("max_solve_iters must be >= 1");
}

Eigen::MatrixXd target_group_gradients(const EmbeddingDataset& target,
                                       const ClassifierParams& params) {
    require_groups(target, "target_group_gradients");
    const auto rows = target.rows_by_group();
    for (std::size_t g = 0; g < rows.size(); ++g)
        if (rows[g].empty())
            throw ValidationError("target group " + std::to_string(g) + " is empty");
    const Eigen::MatrixXd grads = per_sample_gradients(target, params);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), grads.cols());
    for (std::size_t g = 0; g < rows.size(); ++g) {
        for (auto i : rows[g]) out.row(static_cast<Eigen::Index>(g)) += grads.row(static_cast<Eigen::Index>(i));
        out.row(static_cast<Eigen::Index>(g)) /= static_cast<double>(rows[g].size());
    }
    return out;
}

namespace {

void check_residuals(const Eigen::MatrixXd& h, const Eigen::MatrixXd& b, const Eigen::MatrixXd& s,
                     double tol, const char* strategy) {
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
        const double res = (h * s.col(c) - b.col(c)).norm();
        const double scale = b.col(c).norm();
        if (!(res <= tol * scale)) {
            std::ostringstream msg;
            msg << strategy << " Hessian solve residual " << res << " exceeds " << tol
                << " * ||b|| = " << tol * scale << " for right-hand side " << c;
            throw NumericalError(msg.str());
        }
    }
}

}  // namespace

Eigen::MatrixXd hessian_solve(const Eigen::MatrixXd& h, const Eigen::MatrixXd& rhs,
                              const HessianSolveConfig& cfg) {
    cfg.validate();
    if (h.rows() != h.cols() || h.cols() != rhs.cols())
        throw ValidationError("hessian_solve dimension mismatch");
    if (!h.allFinite()) throw NumericalError("Hessian contains non-finite entries");

    const Eigen::MatrixXd b = rhs.transpose();  // dK x m, one column per group
    const bool direct = cfg.strategy == SolveStrategy::direct ||
                        (cfg.strategy == SolveStrategy::automatic && h.rows() <= cfg.direct_max_dim);
    Eigen::MatrixXd s;
    if (direct) {
        const Eigen::LLT<Eigen::MatrixXd> llt(h);
        if (llt.info() != Eigen::Success)
            throw NumericalError("Cholesky factorization failed: Hessian is not positive definite");
        s = llt.solve(b);
        for (int round = 0; round < 2; ++round) {
            const Eigen::MatrixXd r = b - h * s;
            bool done = true;
            for (Eigen::Index c = 0; c < b.cols(); ++c)
                if (r.col(c).norm() > cfg.residual_tol * b.col(c).norm()) done = false;
            if (done) break;
            s += llt.solve(r);
        }
        check_residuals(h, b, s, cfg.residual_tol, "direct");
    } else {
        Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper> cg;
        cg.setTolerance(cfg.residual_tol);
        cg.setMaxIterations(cfg.max_solve_iters);
        cg.compute(h);
        s.resize(b.rows(), b.cols());
        for (Eigen::Index c = 0; c < b.cols(); ++c) {
            if (b.col(c).isZero(0.0)) {
                s.col(c).setZero();
                continue;
            }
            s.col(c) = cg.solve(b.col(c));
            if (cg.info() != Eigen::Success) {
                std::ostringstream msg;
                msg << "conjugate gradients did not converge for right-hand side " << c
                    << " (estimated error " << cg.error() << ")";
                throw NumericalError(msg.str());
            }
        }
        check_residuals(h, b, s, cfg.residual_tol, "iterative");
    }
    return s.transpose();
}

namespace {

// scores(i, g) = -<sample_grads.row(i), directions.row(g)>
Eigen::MatrixXd score_matrix(const Eigen::MatrixXd& sample_grads, const Eigen::MatrixXd& directions) {
    if (sample_grads.cols() != directions.cols())
        throw ValidationError("influence dimension mismatch between held-out and target gradients");
    const Eigen::Index n = sample_grads.rows();
    const Eigen::Index m = directions.rows();
    Eigen::MatrixXd scores(n, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index g = 0; g < m; ++g)
            scores(i, g) = -sample_grads.row(i).dot(directions.row(g));
    return scores;
}

}  // namespace

InfluenceTable influence_from_parts(const Eigen::MatrixXd& sample_grads,
                                    const Eigen::MatrixXd& target_grads, const Eigen::MatrixXd& h,
                                    const HessianSolveConfig& cfg) {
    const Eigen::MatrixXd solved = hessian_solve(h, target_grads, cfg);
    return InfluenceTable{score_matrix(sample_grads, solved), InfluenceMethod::exact};
}

InfluenceTable influence_table(const EmbeddingDataset& heldout, const EmbeddingDataset& target,
                               const ClassifierParams& psi_star, const SampleWeights& w,
                               const InnerSolveConfig& inner, const HessianSolveConfig& solve) {
    const double gnorm = weighted_gradient(heldout, w, psi_star, inner).cwiseAbs().maxCoeff();
    if (gnorm > 10.0 * inner.grad_tol) {
        std::ostringstream msg;
        msg << "psi is not an inner optimum: gradient inf-norm " << gnorm << " > 10 * grad_tol ("
            << 10.0 * inner.grad_tol << ")";
        throw NumericalError(msg.str());
    }
    const Eigen::MatrixXd h = hessian(heldout, w, psi_star, inner);
    return influence_from_parts(per_sample_gradients(heldout, psi_star),
                                target_group_gradients(target, psi_star), h, solve);
}

InfluenceTable hessian_free_table(const EmbeddingDataset& heldout, const EmbeddingDataset& target,
                                  const ClassifierParams& psi_star) {
    return InfluenceTable{score_matrix(per_sample_gradients(heldout, psi_star),
                                       target_group_gradients(target, psi_star)),
                          InfluenceMethod::hessian_free};
}

Eigen::VectorXd aggregate_influence(const InfluenceTable& table, const Eigen::VectorXd& gamma) {
    if (gamma.size() != table.scores.cols())
        throw ValidationError("gamma has " + std::to_string(gamma.size()) + " entries for " +
                              std::to_string(table.scores.cols()) + " groups");
    if (!gamma.allFinite() || gamma.minCoeff() < -1e-9 || std::abs(gamma.sum() - 1.0) > 1e-9)
        throw ValidationError("gamma is not on the probability simplex");
    return table.scores * gamma;
}

}  // namespace gsr
