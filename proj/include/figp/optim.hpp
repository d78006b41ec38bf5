#ifndef FIGP_OPTIM_HPP
#define FIGP_OPTIM_HPP

#include <cmath>
#include <deque>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace figp {

struct LbfgsOptions {
    int max_iterations = 500;
    int history = 10;
    /// Converged when max |gradient| falls below this.
    double grad_tol = 1e-6;
    /// ... or when the objective stops moving relative to its magnitude.
    double rel_tol = 1e-13;
    int max_backtracks = 60;
    double armijo = 1e-4;
};

struct OptimResult {
    Eigen::VectorXd x;
    double value = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd grad;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::string message;
};

/// Limited-memory BFGS ascent with backtracking (Armijo) line search.
/// `f(x, grad)` returns the objective and fills its gradient; a non-finite
/// value marks x as infeasible and the step is shortened.
template <class F>
OptimResult maximize_lbfgs(F&& f, Eigen::VectorXd x0, const LbfgsOptions& opt = {})
{
    using Eigen::VectorXd;
    OptimResult r;
    r.x = std::move(x0);
    r.value = f(r.x, r.grad);
    r.evaluations = 1;
    if (!std::isfinite(r.value)) {
        r.message = "non-finite objective at the starting point";
        return r;
    }

    // Work on the minimization of -f.
    std::deque<std::pair<VectorXd, VectorXd>> mem; // (s, y) pairs
    VectorXd g = -r.grad;
    double fx = -r.value;
    int stalls = 0;

    for (int it = 0; it < opt.max_iterations; ++it) {
        r.iterations = it + 1;
        if (g.lpNorm<Eigen::Infinity>() < opt.grad_tol) {
            r.converged = true;
            r.message = "gradient tolerance reached";
            break;
        }

        // Two-loop recursion.
        VectorXd q = g;
        std::vector<double> alpha(mem.size());
        for (std::size_t i = mem.size(); i-- > 0;) {
            const auto& [s, y] = mem[i];
            alpha[i] = s.dot(q) / y.dot(s);
            q -= alpha[i] * y;
        }
        if (!mem.empty()) {
            const auto& [s, y] = mem.back();
            q *= s.dot(y) / y.squaredNorm();
        } else {
            q /= std::max(1.0, g.norm());
        }
        for (std::size_t i = 0; i < mem.size(); ++i) {
            const auto& [s, y] = mem[i];
            double beta = y.dot(q) / y.dot(s);
            q += (alpha[i] - beta) * s;
        }
        VectorXd dir = -q;
        double slope = g.dot(dir);
        if (!(slope < 0.0)) {
            mem.clear();
            dir = -g / std::max(1.0, g.norm());
            slope = g.dot(dir);
        }

        double step = 1.0;
        VectorXd xn, gn;
        double fn = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int bt = 0; bt < opt.max_backtracks; ++bt) {
            xn = r.x + step * dir;
            VectorXd grad_up;
            double val = f(xn, grad_up);
            ++r.evaluations;
            if (std::isfinite(val) && grad_up.allFinite()) {
                fn = -val;
                if (fn <= fx + opt.armijo * step * slope) {
                    gn = -grad_up;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (!mem.empty()) {
                mem.clear();
                continue;
            }
            r.converged = g.lpNorm<Eigen::Infinity>() < std::sqrt(opt.grad_tol);
            r.message = "line search failed";
            break;
        }

        VectorXd s = xn - r.x;
        VectorXd y = gn - g;
        if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            mem.emplace_back(std::move(s), std::move(y));
            if (static_cast<int>(mem.size()) > opt.history)
                mem.pop_front();
        }
        double change = fx - fn;
        r.x = std::move(xn);
        g = std::move(gn);
        fx = fn;
        if (change <= opt.rel_tol * std::max(1.0, std::abs(fx))) {
            if (++stalls >= 3) {
                r.converged = true;
                r.message = "objective change below tolerance";
                break;
            }
        } else {
            stalls = 0;
        }
    }
    if (r.message.empty())
        r.message = "iteration limit reached";
    r.value = -fx;
    r.grad = -g;
    return r;
}

} // namespace figp

#endif
