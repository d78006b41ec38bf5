#ifndef FIGP_SIMULATE_HPP
#define FIGP_SIMULATE_HPP

#include <cmath>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"
#include "figp/kernel.hpp"
#include "figp/random.hpp"

namespace figp {

/// Generating model of a synthetic data set.
struct SyntheticSpec {
    Index n = 300;
    IndexGrid grid = IndexGrid::uniform(40);
    KernelSpec kernel{FunctionalDistance{0.5, AlfParams::sde(0.3, 7.6)}, 1.0, 0.05};
    /// Profiles are zero-mean SE Gaussian-process paths over the index.
    double profile_length_scale = 0.2;
    double profile_sd = 1.0;

    void check() const
    {
        if (n < 1)
            throw ConfigError("simulate: n must be positive");
        if (!(profile_length_scale > 0.0 && profile_sd > 0.0))
            throw ConfigError("simulate: profile length-scale and sd must be positive");
        if (!kernel.valid())
            throw ConfigError("simulate: invalid generating kernel");
    }
};

/// Zero-mean draw with covariance `cov` (PSD). A pivoted LDL^T factor is used
/// so that rank-deficient covariances (duplicate inputs, no noise) are exact.
inline VectorXd draw_mvn(const MatrixXd& cov, Rng& rng)
{
    Eigen::LDLT<MatrixXd> ldlt(cov);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("simulate: covariance factorization failed");
    VectorXd d = ldlt.vectorD();
    const double scale = std::max(1.0, cov.diagonal().cwiseAbs().maxCoeff());
    for (Index i = 0; i < d.size(); ++i) {
        if (d(i) < -1e-8 * scale)
            throw NumericalError("simulate: covariance is not positive semidefinite");
        d(i) = std::max(d(i), 0.0);
    }
    VectorXd z = std_normal_vector(rng, cov.rows());
    VectorXd v = d.cwiseSqrt().cwiseProduct(z);
    VectorXd lv = ldlt.matrixL() * v;
    return ldlt.transpositionsP().transpose() * lv;
}

/// N profiles on the grid, each an SE-GP path with the given length-scale.
inline MatrixXd simulate_profiles(Index n, const IndexGrid& grid, double length_scale, double sd, Rng& rng)
{
    const Index k = grid.size();
    MatrixXd c(k, k);
    for (Index a = 0; a < k; ++a)
        for (Index b = 0; b < k; ++b) {
            double r = (grid[a] - grid[b]) / length_scale;
            c(a, b) = sd * sd * std::exp(-0.5 * r * r);
        }
    c.diagonal().array() += 1e-8 * sd * sd;
    Eigen::LLT<MatrixXd> llt(c);
    if (llt.info() != Eigen::Success)
        throw NumericalError("simulate: profile covariance factorization failed");
    MatrixXd z(k, n);
    for (Index i = 0; i < n; ++i)
        z.col(i) = std_normal_vector(rng, k);
    return (llt.matrixL() * z).transpose();
}

/// Outputs drawn from the exact GP prior S_y of `kernel` at the given inputs.
inline VectorXd simulate_outputs(const MatrixXd& x, const IndexGrid& grid, const KernelSpec& kernel, Rng& rng)
{
    VectorXd w = feature_weights(kernel, &grid, x.cols());
    MatrixXd s = covariance(cross_distances(x, x, w), kernel.sigma_f, kernel.sigma_eps, true);
    return draw_mvn(s, rng);
}

inline Dataset simulate(const SyntheticSpec& spec, std::uint64_t seed)
{
    spec.check();
    Rng rng(seed);
    MatrixXd x = simulate_profiles(spec.n, spec.grid, spec.profile_length_scale, spec.profile_sd, rng);
    VectorXd y = simulate_outputs(x, spec.grid, spec.kernel, rng);
    return {std::move(x), spec.grid, std::move(y)};
}

} // namespace figp

#endif
