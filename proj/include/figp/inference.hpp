#ifndef FIGP_INFERENCE_HPP
#define FIGP_INFERENCE_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figp/diagnostics.hpp"
#include "figp/error.hpp"
#include "figp/gp.hpp"
#include "figp/nuts.hpp"
#include "figp/optim.hpp"
#include "figp/priors.hpp"
#include "figp/random.hpp"

namespace figp {

struct McmcConfig {
    int n_random = 3000;
    int n_opts = 30;
    int warmup = 500;
    int draws = 1500;
    double target_accept = 0.8;
    int max_treedepth = 10;
    SamplerKind sampler = SamplerKind::Nuts;
    LbfgsOptions lbfgs{};

    void check() const
    {
        if (n_random < 1 || n_opts < 1 || warmup < 0 || draws < 1 || max_treedepth < 1)
            throw ConfigError("mcmc: counts must be positive");
        if (!(target_accept > 0.0 && target_accept < 1.0))
            throw ConfigError("mcmc: target_accept must lie in (0, 1)");
    }

    SamplerOptions sampler_options() const
    {
        SamplerOptions o;
        o.kind = sampler;
        o.warmup = warmup;
        o.draws = draws;
        o.target_accept = target_accept;
        o.max_treedepth = max_treedepth;
        return o;
    }
};

struct Candidate {
    VectorXd theta; // constrained
    double log_post = neg_inf;
};

/// Scores `n` random starting points by log posterior and returns them in
/// non-increasing order. Points with -inf are kept at the end.
inline std::vector<Candidate> random_search(const PosteriorDensity& post, int n, std::uint64_t seed)
{
    std::vector<Candidate> out;
    for (auto& theta : draw_init(n, post.layout(), seed)) {
        double lp = post.log_posterior(theta);
        out.push_back({std::move(theta), lp});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Candidate& a, const Candidate& b) { return a.log_post > b.log_post; });
    if (!std::isfinite(out.front().log_post))
        throw NumericalError("random search: every candidate has log posterior -inf");
    return out;
}

struct MapEstimate {
    VectorXd theta;
    double log_post = neg_inf;
    int starts = 0;
    std::vector<std::string> failures;
};

/// L-BFGS ascent of the unconstrained log posterior from the top `n_opts`
/// candidates. The winner is the terminal point with the highest log
/// posterior, which is never below the best starting value.
inline MapEstimate multistart_optimize(const PosteriorDensity& post, const std::vector<Candidate>& candidates,
                                       int n_opts, const LbfgsOptions& opt = {})
{
    if (candidates.empty())
        throw ConfigError("multistart: no candidates");
    const ParamLayout& layout = post.layout();
    MapEstimate best;
    auto objective = [&](const VectorXd& u, VectorXd& g) { return post.value_and_gradient(u, g); };
    const int n = std::min<int>(n_opts, static_cast<int>(candidates.size()));
    for (int s = 0; s < n; ++s) {
        const Candidate& c = candidates[static_cast<std::size_t>(s)];
        ++best.starts;
        if (std::isfinite(c.log_post) && c.log_post > best.log_post) {
            best.theta = c.theta;
            best.log_post = c.log_post;
        }
        if (!std::isfinite(c.log_post)) {
            best.failures.push_back("start " + std::to_string(s) + ": log posterior -inf");
            continue;
        }
        OptimResult r = maximize_lbfgs(objective, layout.unconstrain(c.theta), opt);
        if (!r.x.allFinite()) {
            best.failures.push_back("start " + std::to_string(s) + ": " + r.message);
            continue;
        }
        VectorXd theta = layout.constrain(r.x);
        double lp = post.log_posterior(theta);
        if (!std::isfinite(lp)) {
            best.failures.push_back("start " + std::to_string(s) + ": terminal point off support");
            continue;
        }
        if (lp > best.log_post) {
            best.theta = std::move(theta);
            best.log_post = lp;
        }
    }
    if (!std::isfinite(best.log_post))
        throw NumericalError("multistart: every optimization failed");
    return best;
}

/// Post-warmup draws of one chain in constrained coordinates.
struct PosteriorSample {
    ParamLayout layout;
    MatrixXd draws;       // M x dim
    VectorXd log_posts;   // constrained log posterior of each draw
    VectorXd accept_stats;
    Eigen::VectorXi treedepths;
    int divergences = 0;
    int warmup_divergences = 0;
    int treedepth_hits = 0;
    double step_size = 0.0;

    Index size() const noexcept { return draws.rows(); }
    VectorXd theta(Index m) const { return draws.row(m).transpose(); }
    VectorXd mean() const { return draws.colwise().mean().transpose(); }
};

/// Runs one chain initialized at `init` (constrained).
inline PosteriorSample sample(const PosteriorDensity& post, const VectorXd& init, const McmcConfig& cfg,
                              std::uint64_t seed)
{
    cfg.check();
    const ParamLayout& layout = post.layout();
    if (!layout.in_support(init))
        throw ConfigError("sample: initial point outside the parameter support");
    Rng rng(seed);
    ChainResult chain = run_chain(post, layout.unconstrain(init), cfg.sampler_options(), rng);

    PosteriorSample s;
    s.layout = layout;
    s.draws.resize(chain.draws.rows(), layout.dim());
    s.log_posts.resize(chain.draws.rows());
    for (Index m = 0; m < chain.draws.rows(); ++m) {
        VectorXd u = chain.draws.row(m).transpose();
        s.draws.row(m) = layout.constrain(u).transpose();
        s.log_posts(m) = chain.log_density(m) - layout.log_jacobian(u);
    }
    s.accept_stats = chain.accept_stats;
    s.treedepths = chain.treedepths;
    s.divergences = chain.divergences;
    s.warmup_divergences = chain.warmup_divergences;
    s.treedepth_hits = chain.treedepth_hits;
    s.step_size = chain.step_size;
    return s;
}

/// Names of the monitored relevance weights of a layout.
inline std::vector<std::string> monitored_names(const ParamLayout& layout, Index n_weights)
{
    std::vector<std::string> names;
    const char* stem = is_functional(layout.kind()) ? "omega" : "inv_sq_sigma";
    if (layout.kind() == ModelKind::SE)
        return {stem};
    for (Index k = 0; k < n_weights; ++k)
        names.push_back(std::string(stem) + "[" + std::to_string(k + 1) + "]");
    return names;
}

/// Relevance weights of every draw: M x (K or P).
inline MatrixXd monitored_weights(const PosteriorSample& s, const IndexGrid* grid)
{
    MatrixXd out;
    for (Index m = 0; m < s.size(); ++m) {
        VectorXd w = s.layout.relevance_weights(s.theta(m), grid);
        if (m == 0)
            out.resize(s.size(), w.size());
        out.row(m) = w.transpose();
    }
    return out;
}

inline DiagnosticsReport diagnose(const PosteriorSample& s, const IndexGrid* grid)
{
    MatrixXd w = monitored_weights(s, grid);
    DiagnosticsReport r = diagnose(w, monitored_names(s.layout, w.cols()));
    r.divergences = s.divergences;
    r.treedepth_hits = s.treedepth_hits;
    r.mean_accept = s.accept_stats.size() ? s.accept_stats.mean() : 0.0;
    r.step_size = s.step_size;
    return r;
}

struct FitResult {
    std::vector<Candidate> top; // the candidates handed to the optimizer
    MapEstimate map;
    PosteriorSample posterior;
    DiagnosticsReport diagnostics;
};

/// Random search, multistart MAP, then one chain from the MAP estimate.
/// `seed` owns the whole fit; sub-seeds are derived from it.
inline FitResult fit(const PosteriorDensity& post, const McmcConfig& cfg, std::uint64_t seed)
{
    cfg.check();
    FitResult r;
    auto cands = random_search(post, cfg.n_random, stream_seed(seed, {1}));
    r.map = multistart_optimize(post, cands, cfg.n_opts, cfg.lbfgs);
    cands.resize(static_cast<std::size_t>(std::min<int>(cfg.n_opts, static_cast<int>(cands.size()))));
    r.top = std::move(cands);
    r.posterior = sample(post, r.map.theta, cfg, stream_seed(seed, {2}));
    r.diagnostics = diagnose(r.posterior, post.data().grid());
    return r;
}

} // namespace figp

#endif
