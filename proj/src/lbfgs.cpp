#include "gsr/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "gsr/error.hpp"

namespace gsr {

namespace {

struct Trial {
    double alpha = 0.0;
    double value = 0.0;
    double slope = 0.0;  // directional derivative along p
};

// Minimizer of the cubic interpolating (a, b), clamped inside the interval
// away from its ends; bisection when the cubic is degenerate.
double cubic_step(const Trial& a, const Trial& b) {
    const double lo = std::min(a.alpha, b.alpha);
    const double hi = std::max(a.alpha, b.alpha);
    const double width = hi - lo;
    const double d1 = a.slope + b.slope - 3.0 * (a.value - b.value) / (a.alpha - b.alpha);
    const double disc = d1 * d1 - a.slope * b.slope;
    double t = 0.5 * (lo + hi);
    if (disc >= 0.0) {
        const double d2 = std::copysign(std::sqrt(disc), b.alpha - a.alpha);
        const double denom = b.slope - a.slope + 2.0 * d2;
        if (denom != 0.0) {
            const double cand = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
            if (std::isfinite(cand)) t = cand;
        }
    }
    return std::clamp(t, lo + 0.1 * width, hi - 0.1 * width);
}

class LineSearch {
public:
    LineSearch(const Objective& objective, const LbfgsOptions& options, const Eigen::VectorXd& x,
               const Eigen::VectorXd& p, double f0, double slope0)
        : objective_(objective), options_(options), x_(x), p_(p), f0_(f0), slope0_(slope0),
          grad_(x.size()) {
        noise_ = 1e-12 * (std::abs(f0) + 1.0);
    }

    // Returns true with the accepted point in (point, value, grad).
    bool run(double alpha_init, Eigen::VectorXd& point, double& value, Eigen::VectorXd& grad,
             int& evaluations) {
        Trial prev{0.0, f0_, slope0_};
        double alpha = alpha_init;
        for (int i = 0; i < options_.max_line_search; ++i) {
            const Trial cur = evaluate(alpha, evaluations);
            if (!std::isfinite(cur.value)) {
                alpha = 0.5 * (prev.alpha + alpha);
                continue;
            }
            if (!sufficient_decrease(cur) || (i > 0 && no_better(cur, prev)))
                return zoom(prev, cur, point, value, grad, evaluations);
            if (curvature(cur)) return accept(cur, point, value, grad);
            if (cur.slope >= 0.0) return zoom(cur, prev, point, value, grad, evaluations);
            prev = cur;
            alpha *= 2.0;
        }
        return false;
    }

private:
    Trial evaluate(double alpha, int& evaluations) {
        trial_point_ = x_ + alpha * p_;
        const double f = objective_(trial_point_, grad_);
        ++evaluations;
        last_alpha_ = alpha;
        return Trial{alpha, f, grad_.dot(p_)};
    }

    bool sufficient_decrease(const Trial& t) const {
        if (t.value <= f0_ + options_.wolfe_c1 * t.alpha * slope0_) return true;
        // Approximate Wolfe: f is flat to rounding, slope bound replaces Armijo.
        return t.value <= f0_ + noise_ &&
               t.slope <= (1.0 - 2.0 * options_.wolfe_c1) * std::abs(slope0_);
    }

    // Whether `cur` fails to improve on `ref`. When both values sit within
    // rounding of f0 the values carry no information and the slope decides.
    bool no_better(const Trial& cur, const Trial& ref) const {
        if (std::abs(cur.value - f0_) <= noise_ && std::abs(ref.value - f0_) <= noise_)
            return cur.slope >= 0.0;
        return cur.value >= ref.value;
    }

    bool curvature(const Trial& t) const {
        return std::abs(t.slope) <= -options_.wolfe_c2 * slope0_;
    }

    bool accept(const Trial& t, Eigen::VectorXd& point, double& value, Eigen::VectorXd& grad) {
        if (t.alpha != last_alpha_) {
            int dummy = 0;
            evaluate(t.alpha, dummy);
        }
        point = trial_point_;
        value = t.value;
        grad = grad_;
        return true;
    }

    bool zoom(Trial lo, Trial hi, Eigen::VectorXd& point, double& value, Eigen::VectorXd& grad,
              int& evaluations) {
        for (int i = 0; i < options_.max_line_search; ++i) {
            if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha)))
                break;
            const Trial cur = evaluate(cubic_step(lo, hi), evaluations);
            if (!std::isfinite(cur.value) || !sufficient_decrease(cur) || no_better(cur, lo)) {
                hi = cur;
                continue;
            }
            if (curvature(cur)) return accept(cur, point, value, grad);
            if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
            lo = cur;
        }
        // Interval collapsed: keep the best point if it made any progress.
        if (lo.alpha > 0.0 && lo.value < f0_) {
            evaluate(lo.alpha, evaluations);
            return accept(lo, point, value, grad);
        }
        return false;
    }

    const Objective& objective_;
    const LbfgsOptions& options_;
    const Eigen::VectorXd& x_;
    const Eigen::VectorXd& p_;
    double f0_;
    double slope0_;
    double noise_;
    Eigen::VectorXd grad_;
    Eigen::VectorXd trial_point_;
    double last_alpha_ = -1.0;
};

struct CurvaturePair {
    Eigen::VectorXd s;
    Eigen::VectorXd y;
    double rho;
};

Eigen::VectorXd two_loop(const std::deque<CurvaturePair>& history, const Eigen::VectorXd& grad) {
    Eigen::VectorXd q = -grad;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
        alpha[i] = history[i].rho * history[i].s.dot(q);
        q -= alpha[i] * history[i].y;
    }
    if (!history.empty()) {
        const auto& last = history.back();
        q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double beta = history[i].rho * history[i].y.dot(q);
        q += (alpha[i] - beta) * history[i].s;
    }
    return q;
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options) {
    LbfgsResult result;
    result.x = std::move(x0);
    Eigen::VectorXd grad(result.x.size());
    result.value = objective(result.x, grad);
    result.evaluations = 1;
    if (!std::isfinite(result.value) || !grad.allFinite())
        throw NumericalError("objective is not finite at the initial point");

    std::deque<CurvaturePair> history;
    Eigen::VectorXd next_x(result.x.size());
    Eigen::VectorXd next_grad(result.x.size());
    bool restarted = false;

    for (;;) {
        result.grad_inf_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        if (result.grad_inf_norm <= options.grad_tol) return result;
        if (result.iterations >= options.max_iters) {
            std::ostringstream msg;
            msg << "L-BFGS did not converge in " << options.max_iters
                << " iterations; final gradient inf-norm " << result.grad_inf_norm;
            throw NumericalError(msg.str());
        }

        Eigen::VectorXd p = two_loop(history, grad);
        double slope = grad.dot(p);
        if (!(slope < 0.0)) {
            history.clear();
            p = -grad;
            slope = -grad.squaredNorm();
        }
        const double alpha0 =
            history.empty() ? std::min(1.0, 1.0 / grad.lpNorm<1>()) : 1.0;

        double next_value = 0.0;
        LineSearch ls(objective, options, result.x, p, result.value, slope);
        if (!ls.run(alpha0, next_x, next_value, next_grad, result.evaluations)) {
            if (!history.empty() && !restarted) {
                history.clear();
                restarted = true;
                continue;
            }
            std::ostringstream msg;
            msg << "line search failed at iteration " << result.iterations
                << "; gradient inf-norm " << result.grad_inf_norm;
            throw NumericalError(msg.str());
        }
        restarted = false;

        CurvaturePair pair{next_x - result.x, next_grad - grad, 0.0};
        const double sy = pair.s.dot(pair.y);
        if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (static_cast<int>(history.size()) > options.memory) history.pop_front();
        }
        result.x.swap(next_x);
        grad.swap(next_grad);
        result.value = next_value;
        ++result.iterations;
    }
}

}  // namespace gsr
