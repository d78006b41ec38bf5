#ifndef FIGP_DIAGNOSTICS_HPP
#define FIGP_DIAGNOSTICS_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "figp/error.hpp"

namespace figp {

namespace detail {

inline double mean_of(const Eigen::Ref<const Eigen::VectorXd>& x) { return x.mean(); }

/// Batch-means estimate of the spectral density at zero (the asymptotic
/// variance of sqrt(n) * mean), batch size floor(sqrt(n)).
inline double spectral_zero(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    const Eigen::Index n = x.size();
    const Eigen::Index b = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
    const Eigen::Index a = n / b;
    if (a < 2)
        throw DataError("diagnostics: need at least two batches");
    Eigen::VectorXd means(a);
    for (Eigen::Index i = 0; i < a; ++i)
        means(i) = x.segment(i * b, b).mean();
    double m = means.mean();
    double var = (means.array() - m).square().sum() / static_cast<double>(a - 1);
    return static_cast<double>(b) * var;
}

} // namespace detail

/// Geweke z-score comparing the first `frac_a` and last `frac_b` of a chain.
/// NaN when both windows have zero spectral variance.
inline double geweke(const Eigen::Ref<const Eigen::VectorXd>& x, double frac_a = 0.1, double frac_b = 0.5)
{
    const Eigen::Index n = x.size();
    if (n < 20)
        throw DataError("geweke: series length must be >= 20");
    if (!(frac_a > 0.0 && frac_b > 0.0 && frac_a + frac_b <= 1.0))
        throw ConfigError("geweke: window fractions must be positive and sum to at most 1");
    if (!x.allFinite())
        throw DataError("geweke: non-finite value in series");
    const Eigen::Index na = static_cast<Eigen::Index>(std::floor(frac_a * static_cast<double>(n)));
    const Eigen::Index nb = static_cast<Eigen::Index>(std::floor(frac_b * static_cast<double>(n)));
    auto a = x.head(na);
    auto b = x.tail(nb);
    double sa = detail::spectral_zero(a);
    double sb = detail::spectral_zero(b);
    double denom = sa / static_cast<double>(na) + sb / static_cast<double>(nb);
    if (!(denom > 0.0))
        return std::numeric_limits<double>::quiet_NaN();
    return (a.mean() - b.mean()) / std::sqrt(denom);
}

/// Batch-means Monte Carlo standard error of the mean, batch size floor(sqrt(M)).
inline double mcse(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (!x.allFinite())
        throw DataError("mcse: non-finite value in series");
    return std::sqrt(detail::spectral_zero(x) / static_cast<double>(x.size()));
}

inline double sample_sd(const Eigen::Ref<const Eigen::VectorXd>& x)
{
    if (x.size() < 2)
        return 0.0;
    double m = x.mean();
    return std::sqrt((x.array() - m).square().sum() / static_cast<double>(x.size() - 1));
}

struct MonitoredDiagnostics {
    std::string name;
    double mean = 0.0;
    double sd = 0.0;
    double geweke_z = 0.0;
    double mcse = 0.0;
    bool geweke_ok = false;
    bool mcse_ok = false;
};

struct DiagnosticsReport {
    std::vector<MonitoredDiagnostics> quantities;
    int divergences = 0;
    int treedepth_hits = 0;
    double geweke_threshold = 3.0;
    double mean_accept = 0.0;
    double step_size = 0.0;

    bool geweke_pass() const
    {
        for (const auto& q : quantities)
            if (!q.geweke_ok)
                return false;
        return true;
    }
    bool mcse_pass() const
    {
        for (const auto& q : quantities)
            if (!q.mcse_ok)
                return false;
        return true;
    }
    bool pass() const { return geweke_pass() && mcse_pass() && divergences == 0 && treedepth_hits == 0; }
};

/// Diagnostics for each column of `monitored` (draws x quantities).
/// A constant column passes: its Geweke z is NaN and its MCSE is zero.
inline DiagnosticsReport diagnose(const Eigen::MatrixXd& monitored, const std::vector<std::string>& names,
                                  double geweke_threshold = 3.0)
{
    if (static_cast<std::size_t>(monitored.cols()) != names.size())
        throw ShapeError("diagnose: one name per monitored column expected");
    DiagnosticsReport r;
    r.geweke_threshold = geweke_threshold;
    for (Eigen::Index j = 0; j < monitored.cols(); ++j) {
        MonitoredDiagnostics q;
        q.name = names[static_cast<std::size_t>(j)];
        Eigen::VectorXd col = monitored.col(j);
        q.mean = col.mean();
        q.sd = sample_sd(col);
        q.geweke_z = geweke(col);
        q.mcse = mcse(col);
        q.geweke_ok = std::isnan(q.geweke_z) ? q.sd == 0.0 : std::abs(q.geweke_z) < geweke_threshold;
        q.mcse_ok = q.sd == 0.0 || q.mcse < 0.1 * q.sd;
        r.quantities.push_back(std::move(q));
    }
    return r;
}

} // namespace figp

#endif
