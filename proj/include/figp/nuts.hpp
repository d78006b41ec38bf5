#ifndef FIGP_NUTS_HPP
#define FIGP_NUTS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "figp/error.hpp"
#include "figp/random.hpp"

namespace figp {

enum class SamplerKind { Nuts, RandomWalk };

struct SamplerOptions {
    SamplerKind kind = SamplerKind::Nuts;
    int warmup = 500;
    int draws = 1500;
    double target_accept = 0.8;
    int max_treedepth = 10;
    /// Energy error beyond which a trajectory is declared divergent.
    double max_energy_error = 1000.0;
    bool adapt_metric = true;

    void check() const
    {
        if (warmup < 0 || draws < 1)
            throw ConfigError("sampler: warmup must be >= 0 and draws >= 1");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw ConfigError("sampler: target_accept must lie in (0, 1)");
        if (max_treedepth < 1)
            throw ConfigError("sampler: max_treedepth must be >= 1");
    }
};

/// Raw chain output in unconstrained coordinates.
struct ChainResult {
    Eigen::MatrixXd draws;       // draws x dim
    Eigen::VectorXd log_density; // target log density of each draw
    Eigen::VectorXd accept_stats;
    Eigen::VectorXi treedepths;
    Eigen::VectorXi n_leapfrog;
    int divergences = 0;          // post-warmup
    int warmup_divergences = 0;
    int treedepth_hits = 0;       // post-warmup
    double step_size = 0.0;
    Eigen::VectorXd inv_metric;
};

namespace detail {

inline double log_sum_exp(double a, double b)
{
    if (a == -std::numeric_limits<double>::infinity())
        return b;
    if (b == -std::numeric_limits<double>::infinity())
        return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Nesterov dual averaging of log step size towards a target accept rate.
class DualAveraging {
public:
    DualAveraging(double target, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75)
        : delta_(target), gamma_(gamma), t0_(t0), kappa_(kappa)
    {
    }

    void restart(double step)
    {
        mu_ = std::log(10.0 * step);
        counter_ = 0;
        s_bar_ = 0.0;
        x_bar_ = 0.0;
    }

    double update(double accept)
    {
        ++counter_;
        accept = std::min(1.0, accept);
        double c = static_cast<double>(counter_);
        double eta = 1.0 / (c + t0_);
        s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept);
        double x = mu_ - s_bar_ * std::sqrt(c) / gamma_;
        double x_eta = std::pow(c, -kappa_);
        x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
        return std::exp(x);
    }

    double final_step() const { return std::exp(x_bar_); }

private:
    double delta_, gamma_, t0_, kappa_;
    double mu_ = 0.0, s_bar_ = 0.0, x_bar_ = 0.0;
    long counter_ = 0;
};

/// Welford accumulator for a diagonal metric.
class VarianceEstimator {
public:
    explicit VarianceEstimator(Eigen::Index dim) : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {}

    void add(const Eigen::VectorXd& x)
    {
        ++n_;
        Eigen::VectorXd d = x - mean_;
        mean_ += d / static_cast<double>(n_);
        m2_ += d.cwiseProduct(x - mean_);
    }

    long count() const { return n_; }

    /// Sample variance shrunk towards 1e-3, as in common HMC practice.
    Eigen::VectorXd regularized() const
    {
        double n = static_cast<double>(n_);
        Eigen::VectorXd var = m2_ / (n - 1.0);
        return (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
    }

    void reset()
    {
        n_ = 0;
        mean_.setZero();
        m2_.setZero();
    }

private:
    long n_ = 0;
    Eigen::VectorXd mean_, m2_;
};

/// Warmup phases: step size only, metric window 1, metric window 2 (second
/// half of warmup), then a closing step-size buffer.
struct WarmupPlan {
    int init_end = 0;
    int window1_end = 0;
    int window2_end = 0;
    bool metric = false;

    WarmupPlan(int warmup, bool adapt_metric)
    {
        metric = adapt_metric && warmup >= 20;
        if (!metric)
            return;
        init_end = static_cast<int>(0.15 * warmup);
        window1_end = warmup / 2;
        window2_end = warmup - static_cast<int>(0.1 * warmup);
    }
};

template <class Target>
class Hamiltonian {
public:
    struct Point {
        Eigen::VectorXd q, p, grad;
        double log_p = -std::numeric_limits<double>::infinity();
    };

    Hamiltonian(const Target& target, Eigen::VectorXd inv_metric) : target_(target), inv_metric_(std::move(inv_metric)) {}

    void set_inv_metric(Eigen::VectorXd m) { inv_metric_ = std::move(m); }
    const Eigen::VectorXd& inv_metric() const { return inv_metric_; }

    void init(Point& z) const { z.log_p = target_.value_and_gradient(z.q, z.grad); }

    double energy(const Point& z) const
    {
        if (!std::isfinite(z.log_p))
            return std::numeric_limits<double>::infinity();
        return -z.log_p + 0.5 * z.p.dot(inv_metric_.cwiseProduct(z.p));
    }

    Eigen::VectorXd velocity(const Eigen::VectorXd& p) const { return inv_metric_.cwiseProduct(p); }

    void sample_momentum(Point& z, Rng& rng) const
    {
        z.p.resize(z.q.size());
        for (Eigen::Index i = 0; i < z.q.size(); ++i)
            z.p(i) = std_normal(rng) / std::sqrt(inv_metric_(i));
    }

    void leapfrog(Point& z, double eps) const
    {
        z.p += 0.5 * eps * z.grad;
        z.q += eps * inv_metric_.cwiseProduct(z.p);
        z.log_p = target_.value_and_gradient(z.q, z.grad);
        if (!std::isfinite(z.log_p) || !z.grad.allFinite()) {
            z.log_p = -std::numeric_limits<double>::infinity();
            return;
        }
        z.p += 0.5 * eps * z.grad;
    }

private:
    const Target& target_;
    Eigen::VectorXd inv_metric_;
};

struct TransitionInfo {
    double accept_stat = 0.0;
    int depth = 0;
    int n_leapfrog = 0;
    bool divergent = false;
};

/// One NUTS transition: multinomial sampling over the trajectory with the
/// generalized U-turn criterion checked across and between subtrees.
template <class Target>
class NutsKernel {
public:
    using Ham = Hamiltonian<Target>;
    using Point = typename Ham::Point;

    NutsKernel(const Ham& ham, int max_depth, double max_energy_error)
        : ham_(ham), max_depth_(max_depth), max_de_(max_energy_error)
    {
    }

    TransitionInfo transition(Point& current, double eps, Rng& rng)
    {
        eps_ = eps;
        divergent_ = false;
        n_leapfrog_ = 0;
        sum_metro_ = 0.0;

        ham_.sample_momentum(current, rng);
        const double h0 = ham_.energy(current);
        Point z_fwd = current, z_bck = current, z_sample = current, z_propose = current;

        Eigen::VectorXd p_fwd_fwd = current.p, p_fwd_bck = current.p;
        Eigen::VectorXd p_bck_fwd = current.p, p_bck_bck = current.p;
        Eigen::VectorXd ps_fwd_fwd = ham_.velocity(current.p);
        Eigen::VectorXd ps_fwd_bck = ps_fwd_fwd, ps_bck_fwd = ps_fwd_fwd, ps_bck_bck = ps_fwd_fwd;
        Eigen::VectorXd rho = current.p;
        double log_sum_weight = 0.0;
        const Eigen::Index dim = current.q.size();

        int depth = 0;
        while (depth < max_depth_) {
            Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(dim), rho_bck = Eigen::VectorXd::Zero(dim);
            bool valid = false;
            double lsw_sub = -std::numeric_limits<double>::infinity();

            if (uniform01(rng) > 0.5) {
                Point z = z_fwd;
                rho_bck = rho;
                p_bck_fwd = p_fwd_bck;
                ps_bck_fwd = ps_fwd_bck;
                valid = build_tree(depth, z, z_propose, ps_fwd_bck, ps_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd, h0, 1.0,
                                   lsw_sub, rng);
                z_fwd = std::move(z);
            } else {
                Point z = z_bck;
                rho_fwd = rho;
                p_fwd_bck = p_bck_fwd;
                ps_fwd_bck = ps_bck_fwd;
                valid = build_tree(depth, z, z_propose, ps_bck_fwd, ps_bck_bck, rho_bck, p_bck_fwd, p_bck_bck, h0, -1.0,
                                   lsw_sub, rng);
                z_bck = std::move(z);
            }
            if (!valid)
                break;
            ++depth;

            if (lsw_sub > log_sum_weight) {
                z_sample = z_propose;
            } else if (uniform01(rng) < std::exp(lsw_sub - log_sum_weight)) {
                z_sample = z_propose;
            }
            log_sum_weight = log_sum_exp(log_sum_weight, lsw_sub);

            rho = rho_bck + rho_fwd;
            bool persist = criterion(ps_bck_bck, ps_fwd_fwd, rho);
            persist = persist && criterion(ps_bck_bck, ps_fwd_bck, rho_bck + p_fwd_bck);
            persist = persist && criterion(ps_bck_fwd, ps_fwd_fwd, rho_fwd + p_bck_fwd);
            if (!persist)
                break;
        }

        TransitionInfo info;
        info.depth = depth;
        info.n_leapfrog = n_leapfrog_;
        info.divergent = divergent_;
        info.accept_stat = n_leapfrog_ > 0 ? sum_metro_ / n_leapfrog_ : 0.0;
        current = std::move(z_sample);
        return info;
    }

private:
    static bool criterion(const Eigen::VectorXd& ps_minus, const Eigen::VectorXd& ps_plus, const Eigen::VectorXd& rho)
    {
        return ps_plus.dot(rho) > 0.0 && ps_minus.dot(rho) > 0.0;
    }

    bool build_tree(int depth, Point& z, Point& z_propose, Eigen::VectorXd& ps_beg, Eigen::VectorXd& ps_end,
                    Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                    double& log_sum_weight, Rng& rng)
    {
        if (depth == 0) {
            ham_.leapfrog(z, sign * eps_);
            ++n_leapfrog_;
            double h = ham_.energy(z);
            if (std::isnan(h))
                h = std::numeric_limits<double>::infinity();
            if (h - h0 > max_de_)
                divergent_ = true;
            log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
            sum_metro_ += (h0 - h > 0.0) ? 1.0 : std::exp(h0 - h);
            z_propose = z;
            ps_beg = ham_.velocity(z.p);
            ps_end = ps_beg;
            rho += z.p;
            p_beg = z.p;
            p_end = p_beg;
            return !divergent_;
        }

        const Eigen::Index dim = z.q.size();
        double lsw_init = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_init_end(dim), ps_init_end(dim), rho_init = Eigen::VectorXd::Zero(dim);
        if (!build_tree(depth - 1, z, z_propose, ps_beg, ps_init_end, rho_init, p_beg, p_init_end, h0, sign, lsw_init,
                        rng))
            return false;

        Point z_propose_final = z;
        double lsw_final = -std::numeric_limits<double>::infinity();
        Eigen::VectorXd p_final_beg(dim), ps_final_beg(dim), rho_final = Eigen::VectorXd::Zero(dim);
        if (!build_tree(depth - 1, z, z_propose_final, ps_final_beg, ps_end, rho_final, p_final_beg, p_end, h0, sign,
                        lsw_final, rng))
            return false;

        double lsw_sub = log_sum_exp(lsw_init, lsw_final);
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_sub);
        if (lsw_final > lsw_sub) {
            z_propose = std::move(z_propose_final);
        } else if (uniform01(rng) < std::exp(lsw_final - lsw_sub)) {
            z_propose = std::move(z_propose_final);
        }

        Eigen::VectorXd rho_sub = rho_init + rho_final;
        rho += rho_sub;
        bool persist = criterion(ps_beg, ps_end, rho_sub);
        persist = persist && criterion(ps_beg, ps_final_beg, rho_init + p_final_beg);
        persist = persist && criterion(ps_init_end, ps_end, rho_final + p_init_end);
        return persist;
    }

    const Ham& ham_;
    int max_depth_;
    double max_de_;
    double eps_ = 0.0;
    bool divergent_ = false;
    int n_leapfrog_ = 0;
    double sum_metro_ = 0.0;
};

/// Doubles or halves a unit step until a single leapfrog step crosses an
/// acceptance probability of 0.8.
template <class Target>
double initial_step_size(const Hamiltonian<Target>& ham, const typename Hamiltonian<Target>::Point& z0, Rng& rng)
{
    double eps = 1.0;
    auto try_step = [&](double e) {
        auto z = z0;
        ham.sample_momentum(z, rng);
        double h0 = ham.energy(z);
        ham.leapfrog(z, e);
        double dh = h0 - ham.energy(z);
        return std::isfinite(dh) ? dh : -std::numeric_limits<double>::infinity();
    };
    double dh = try_step(eps);
    int direction = dh > std::log(0.8) ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
        double next = direction == 1 ? 2.0 * eps : 0.5 * eps;
        dh = try_step(next);
        if (direction == 1 && !(dh > std::log(0.8)))
            break;
        eps = next;
        if (direction == -1 && dh > std::log(0.8))
            break;
        if (eps < 1e-12 || eps > 1e7)
            break;
    }
    return eps;
}

} // namespace detail

/// Runs one adaptive chain from q0. `target.value_and_gradient(q, grad)`
/// returns the log density (-inf off support) and fills its gradient.
template <class Target>
ChainResult run_nuts(const Target& target, const Eigen::VectorXd& q0, const SamplerOptions& opt, Rng& rng)
{
    using Ham = detail::Hamiltonian<Target>;
    opt.check();
    const Eigen::Index dim = q0.size();
    Ham ham(target, Eigen::VectorXd::Ones(dim));
    typename Ham::Point z;
    z.q = q0;
    ham.init(z);
    if (!std::isfinite(z.log_p))
        throw NumericalError("sampler: initial point has non-finite log density");

    detail::NutsKernel<Target> kernel(ham, opt.max_treedepth, opt.max_energy_error);
    detail::DualAveraging da(opt.target_accept);
    detail::VarianceEstimator var(dim);
    detail::WarmupPlan plan(opt.warmup, opt.adapt_metric);

    double eps = detail::initial_step_size(ham, z, rng);
    da.restart(eps);

    ChainResult out;
    for (int it = 0; it < opt.warmup; ++it) {
        detail::TransitionInfo info = kernel.transition(z, eps, rng);
        out.warmup_divergences += info.divergent ? 1 : 0;
        eps = da.update(info.accept_stat);

        if (plan.metric && it >= plan.init_end && it < plan.window2_end) {
            var.add(z.q);
            if (it + 1 == plan.window1_end || it + 1 == plan.window2_end) {
                ham.set_inv_metric(var.regularized());
                var.reset();
                eps = detail::initial_step_size(ham, z, rng);
                da.restart(eps);
            }
        }
    }
    if (opt.warmup > 0)
        eps = da.final_step();

    out.draws.resize(opt.draws, dim);
    out.log_density.resize(opt.draws);
    out.accept_stats.resize(opt.draws);
    out.treedepths.resize(opt.draws);
    out.n_leapfrog.resize(opt.draws);
    for (int m = 0; m < opt.draws; ++m) {
        detail::TransitionInfo info = kernel.transition(z, eps, rng);
        out.draws.row(m) = z.q.transpose();
        out.log_density(m) = z.log_p;
        out.accept_stats(m) = info.accept_stat;
        out.treedepths(m) = info.depth;
        out.n_leapfrog(m) = info.n_leapfrog;
        out.divergences += info.divergent ? 1 : 0;
        out.treedepth_hits += info.depth >= opt.max_treedepth ? 1 : 0;
    }
    out.step_size = eps;
    out.inv_metric = ham.inv_metric();
    return out;
}

/// Random-walk Metropolis with a Gaussian proposal scaled by the adapted
/// diagonal metric; a debugging fallback for the gradient-based sampler.
template <class Target>
ChainResult run_random_walk(const Target& target, const Eigen::VectorXd& q0, const SamplerOptions& opt, Rng& rng)
{
    opt.check();
    const Eigen::Index dim = q0.size();
    Eigen::VectorXd q = q0, grad;
    double lp = target.value_and_gradient(q, grad);
    if (!std::isfinite(lp))
        throw NumericalError("sampler: initial point has non-finite log density");

    const double target_rate = 0.234;
    double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
    Eigen::VectorXd sd = Eigen::VectorXd::Constant(dim, 0.1);
    detail::VarianceEstimator var(dim);
    detail::WarmupPlan plan(opt.warmup, opt.adapt_metric);

    auto step = [&](double& accept) {
        Eigen::VectorXd prop = q;
        double s = std::exp(log_scale);
        for (Eigen::Index i = 0; i < dim; ++i)
            prop(i) += s * sd(i) * std_normal(rng);
        double lp_prop = target.value_and_gradient(prop, grad);
        double log_r = std::isfinite(lp_prop) ? lp_prop - lp : -std::numeric_limits<double>::infinity();
        accept = log_r >= 0.0 ? 1.0 : std::exp(log_r);
        if (uniform01(rng) < accept) {
            q = std::move(prop);
            lp = lp_prop;
        }
    };

    ChainResult out;
    for (int it = 0; it < opt.warmup; ++it) {
        double a = 0.0;
        step(a);
        log_scale += (a - target_rate) / std::sqrt(static_cast<double>(it) + 1.0);
        if (plan.metric && it >= plan.init_end && it < plan.window2_end) {
            var.add(q);
            if (it + 1 == plan.window1_end || it + 1 == plan.window2_end) {
                sd = var.regularized().cwiseSqrt();
                var.reset();
            }
        }
    }

    out.draws.resize(opt.draws, dim);
    out.log_density.resize(opt.draws);
    out.accept_stats.resize(opt.draws);
    out.treedepths = Eigen::VectorXi::Zero(opt.draws);
    out.n_leapfrog = Eigen::VectorXi::Zero(opt.draws);
    for (int m = 0; m < opt.draws; ++m) {
        double a = 0.0;
        step(a);
        out.draws.row(m) = q.transpose();
        out.log_density(m) = lp;
        out.accept_stats(m) = a;
    }
    out.step_size = std::exp(log_scale);
    out.inv_metric = sd.cwiseAbs2();
    return out;
}

template <class Target>
ChainResult run_chain(const Target& target, const Eigen::VectorXd& q0, const SamplerOptions& opt, Rng& rng)
{
    return opt.kind == SamplerKind::Nuts ? run_nuts(target, q0, opt, rng) : run_random_walk(target, q0, opt, rng);
}

} // namespace figp

#endif
