#ifndef FIGP_VALIDATION_HPP
#define FIGP_VALIDATION_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "figp/error.hpp"
#include "figp/gp.hpp"
#include "figp/inference.hpp"
#include "figp/linalg.hpp"
#include "figp/random.hpp"

namespace figp {

/// Out-of-sample statistics at one parameter value.
/// `crps` is -log|S| - D^2, a log-score surrogate rather than the textbook CRPS.
struct ValidationStats {
    double rmse = 0.0;
    double r2 = 0.0;
    double ppld = 0.0; // multivariate normal log density of y*
    double crps = 0.0;
    double coverage95 = 0.0;
    double d2 = 0.0;
    double log_det = 0.0;

    double neg_ppld() const { return -ppld; }
    double neg_crps() const { return -crps; }
};

inline ValidationStats stats_from_prediction(const PredictiveDist& pred, const VectorXd& y)
{
    const Index n = y.size();
    if (pred.mean.size() != n || pred.cov.rows() != n || pred.cov.cols() != n)
        throw ShapeError("validation: prediction and test outputs differ in size");
    if (n < 1)
        throw DataError("validation: empty test set");
    VectorXd e = y - pred.mean;
    JitteredCholesky chol = cholesky_with_jitter(pred.cov, pred.prior_variance);
    VectorXd z = chol.llt.matrixL().solve(e);

    ValidationStats s;
    s.d2 = z.squaredNorm();
    s.log_det = chol.log_det();
    s.rmse = e.norm() / std::sqrt(static_cast<double>(n));
    double ss = (y.array() - y.mean()).square().sum();
    s.r2 = ss > 0.0 ? 1.0 - e.squaredNorm() / ss : std::numeric_limits<double>::quiet_NaN();
    s.ppld = -0.5 * s.log_det - 0.5 * s.d2 - 0.5 * static_cast<double>(n) * log_two_pi;
    s.crps = -s.log_det - s.d2;
    Index inside = 0;
    for (Index i = 0; i < n; ++i)
        inside += std::abs(e(i)) <= 1.96 * std::sqrt(pred.cov(i, i)) ? 1 : 0;
    s.coverage95 = static_cast<double>(inside) / static_cast<double>(n);
    return s;
}

/// `x_star` lives in the same feature space as the fitted GP's inputs.
inline ValidationStats stats_at_theta(const FittedGP& gp, const MatrixXd& x_star, const VectorXd& y_star)
{
    return stats_from_prediction(gp.predict(x_star, true), y_star);
}

enum class ThinKind { Systematic, Batch };

struct ThinConfig {
    ThinKind kind = ThinKind::Systematic;
    int m_tilde = 100;
    /// Batch length for batch thinning; draws are spread evenly over batches.
    int batch = 150;
    std::uint64_t seed = 0;
};

/// Indices of the thinned draws, ascending. Systematic thinning takes
/// floor(i M / M~); batch thinning picks draws uniformly without replacement
/// inside consecutive batches, the same count from each.
inline std::vector<Index> thin_indices(Index m, const ThinConfig& cfg)
{
    if (m < 1)
        throw ConfigError("thinning: empty sample");
    if (cfg.m_tilde < 1)
        throw ConfigError("thinning: m_tilde must be positive");
    const Index mt = std::min<Index>(cfg.m_tilde, m);
    std::vector<Index> idx;
    if (cfg.kind == ThinKind::Systematic) {
        for (Index i = 0; i < mt; ++i)
            idx.push_back(i * m / mt);
        return idx;
    }
    if (cfg.batch < 1 || cfg.batch > m)
        throw ConfigError("thinning: batch size must lie in [1, M]");
    const Index nb = m / cfg.batch;
    if (mt % nb != 0 || mt / nb > cfg.batch)
        throw ConfigError("thinning: m_tilde must be a multiple of the batch count and fit inside the batches");
    const Index per = mt / nb;
    Rng rng(cfg.seed);
    for (Index b = 0; b < nb; ++b) {
        std::vector<Index> pool(static_cast<std::size_t>(cfg.batch));
        for (Index j = 0; j < cfg.batch; ++j)
            pool[static_cast<std::size_t>(j)] = b * cfg.batch + j;
        for (Index j = 0; j < per; ++j) {
            auto r = static_cast<Index>(std::floor(uniform01(rng) * static_cast<double>(cfg.batch - j)));
            std::swap(pool[static_cast<std::size_t>(j)], pool[static_cast<std::size_t>(j + r)]);
        }
        std::sort(pool.begin(), pool.begin() + per);
        idx.insert(idx.end(), pool.begin(), pool.begin() + per);
    }
    return idx;
}

/// Posterior-averaged statistics over thinned draws. `neg_ppld` is minus the
/// log of the mean predictive density; `neg_mean_log_ppld` is minus the mean
/// of the per-draw log densities.
struct PosteriorValidation {
    double rmse = 0.0;
    double r2 = 0.0;
    double neg_ppld = 0.0;
    double neg_mean_log_ppld = 0.0;
    double neg_crps = 0.0;
    double coverage95 = 0.0;
    int draws = 0;
};

inline PosteriorValidation average_stats(const std::vector<ValidationStats>& per_draw)
{
    if (per_draw.empty())
        throw ConfigError("validation: no draws to average");
    PosteriorValidation v;
    const double m = static_cast<double>(per_draw.size());
    double max_lp = -std::numeric_limits<double>::infinity();
    for (const auto& s : per_draw)
        max_lp = std::max(max_lp, s.ppld);
    double sum_exp = 0.0;
    for (const auto& s : per_draw) {
        v.rmse += s.rmse / m;
        v.r2 += s.r2 / m;
        v.neg_mean_log_ppld -= s.ppld / m;
        v.neg_crps -= s.crps / m;
        v.coverage95 += s.coverage95 / m;
        sum_exp += std::exp(s.ppld - max_lp);
    }
    v.neg_ppld = -(max_lp + std::log(sum_exp / m));
    v.draws = static_cast<int>(per_draw.size());
    return v;
}

inline PosteriorValidation posterior_stats(const PosteriorSample& post, const GpData& train, const MatrixXd& x_star,
                                           const VectorXd& y_star, const ThinConfig& cfg)
{
    if (post.size() < 1)
        throw ConfigError("validation: empty posterior sample");
    std::vector<ValidationStats> per;
    for (Index m : thin_indices(post.size(), cfg)) {
        FittedGP gp(post.layout.to_spec(post.theta(m)), train);
        per.push_back(stats_at_theta(gp, x_star, y_star));
    }
    return average_stats(per);
}

/// Mean over subsets and its standard error sd / sqrt(H) with the (H-1)
/// denominator; the error is NaN for a single subset.
struct Aggregate {
    double mean = 0.0;
    double se = std::numeric_limits<double>::quiet_NaN();
};

inline Aggregate aggregate(const std::vector<double>& values)
{
    if (values.empty())
        throw ConfigError("aggregate: no values");
    Aggregate a;
    const double h = static_cast<double>(values.size());
    for (double v : values)
        a.mean += v;
    a.mean /= h;
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - a.mean) * (v - a.mean);
        a.se = std::sqrt(ss / (h - 1.0)) / std::sqrt(h);
    }
    return a;
}

} // namespace figp

#endif
