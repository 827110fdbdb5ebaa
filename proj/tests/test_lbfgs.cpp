#include "doctest.h"

#include <cmath>

#include "gsr/error.hpp"
#include "gsr/lbfgs.hpp"

using namespace gsr;

TEST_SUITE("lbfgs") {

TEST_CASE("quadratic with a wide spectrum") {
    const int n = 20;
    Eigen::VectorXd diag(n), b(n);
    for (int i = 0; i < n; ++i) {
        diag(i) = std::pow(10.0, 4.0 * i / (n - 1));
        b(i) = std::sin(i + 1.0);
    }
    Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = diag.cwiseProduct(x) - b;
        return 0.5 * x.dot(diag.cwiseProduct(x)) - b.dot(x);
    };
    LbfgsOptions opt;
    opt.grad_tol = 1e-10;
    const auto r = minimize_lbfgs(f, Eigen::VectorXd::Zero(n), opt);
    CHECK(r.grad_inf_norm <= 1e-10);
    CHECK((r.x - b.cwiseQuotient(diag)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Rosenbrock") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions opt;
    opt.grad_tol = 1e-9;
    const auto r = minimize_lbfgs(f, x0, opt);
    CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-7));
    CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("already optimal start returns without iterating") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g = x;
        return 0.5 * x.squaredNorm();
    };
    const auto r = minimize_lbfgs(f, Eigen::VectorXd::Zero(3), LbfgsOptions{});
    CHECK(r.iterations == 0);
    CHECK(r.value == 0.0);
}

TEST_CASE("iteration cap raises a numerical error with the gradient norm") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        const double a = 1.0 - x(0), b = x(1) - x(0) * x(0);
        g(0) = -2.0 * a - 400.0 * x(0) * b;
        g(1) = 200.0 * b;
        return a * a + 100.0 * b * b;
    };
    Eigen::VectorXd x0(2);
    x0 << -1.2, 1.0;
    LbfgsOptions opt;
    opt.max_iters = 3;
    try {
        minimize_lbfgs(f, x0, opt);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("gradient") != std::string::npos);
    }
}

TEST_CASE("unbounded objective fails instead of looping") {
    Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
        g.setConstant(-1.0);
        return -x.sum();
    };
    LbfgsOptions opt;
    opt.max_iters = 50;
    CHECK_THROWS_AS(minimize_lbfgs(f, Eigen::VectorXd::Zero(2), opt), NumericalError);
}

}  // TEST_SUITE
