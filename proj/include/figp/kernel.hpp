#ifndef FIGP_KERNEL_HPP
#define FIGP_KERNEL_HPP

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"

namespace figp {

// ---------------------------------------------------------------------------
// Asymmetric Laplace functional weight
// ---------------------------------------------------------------------------

/// Which ALF parameters are free: Edn fixes tau = 0 and kappa = 1, SDE fixes
/// kappa = 1, ADE frees all three.
enum class AlfVariant { Edn, SDE, ADE };

/// ALF weight parameters in the (lambda, kappa) parametrization. The left and
/// right decay rates are lambda / kappa and lambda * kappa.
struct AlfParams {
    double tau = 0.0;
    double lambda = 1.0;
    double kappa = 1.0;
    AlfVariant variant = AlfVariant::ADE;

    double lambda1() const noexcept { return lambda / kappa; }
    double lambda2() const noexcept { return lambda * kappa; }

    bool valid() const noexcept
    {
        return tau >= 0.0 && tau <= 1.0 && lambda > 0.0 && kappa > 0.0 && std::isfinite(lambda) &&
               std::isfinite(kappa) && std::isfinite(lambda1()) && std::isfinite(lambda2()) && lambda1() > 0.0 &&
               lambda2() > 0.0;
    }

    static AlfParams edn(double lambda) { return {0.0, lambda, 1.0, AlfVariant::Edn}; }
    static AlfParams sde(double tau, double lambda) { return {tau, lambda, 1.0, AlfVariant::SDE}; }
    static AlfParams ade(double tau, double lambda, double kappa) { return {tau, lambda, kappa, AlfVariant::ADE}; }

    /// From left/right rates: lambda = sqrt(l1 l2), kappa = sqrt(l2 / l1).
    static AlfParams from_rates(double tau, double lambda1, double lambda2)
    {
        return {tau, std::sqrt(lambda1 * lambda2), std::sqrt(lambda2 / lambda1), AlfVariant::ADE};
    }
};

/// omega(t) = exp(-lambda1 |t - tau|) for t <= tau, exp(-lambda2 |t - tau|) for t > tau.
inline double alf_weight(double t, const AlfParams& p) noexcept
{
    if (t <= p.tau)
        return std::exp(-p.lambda1() * (p.tau - t));
    return std::exp(-p.lambda2() * (t - p.tau));
}

/// Weight and its derivatives with respect to tau, log(lambda) and log(kappa).
/// At t == tau the left branch is used, including for the derivatives.
struct AlfWeightDerivs {
    double value;
    double d_tau;
    double d_log_lambda;
    double d_log_kappa;
};

inline AlfWeightDerivs alf_weight_derivs(double t, const AlfParams& p) noexcept
{
    AlfWeightDerivs d{};
    if (t <= p.tau) {
        double r = p.lambda1() * (p.tau - t);
        d.value = std::exp(-r);
        d.d_tau = -p.lambda1() * d.value;
        d.d_log_lambda = -r * d.value;
        d.d_log_kappa = r * d.value;
    } else {
        double r = p.lambda2() * (t - p.tau);
        d.value = std::exp(-r);
        d.d_tau = p.lambda2() * d.value;
        d.d_log_lambda = -r * d.value;
        d.d_log_kappa = -r * d.value;
    }
    return d;
}

inline VectorXd alf_weights(const IndexGrid& grid, const AlfParams& p)
{
    VectorXd w(grid.size());
    for (Index k = 0; k < grid.size(); ++k)
        w(k) = alf_weight(grid[k], p);
    return w;
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Weighted functional norm between two profiles by the trapezoid rule:
/// phi^-2 * sum_k (t_k - t_{k-1}) (D_k + D_{k-1}) / 2 with D_k = omega(t_k) (x_ik - x_jk)^2.
inline double d_omega(const VectorXd& xi, const VectorXd& xj, const IndexGrid& grid, double phi, const AlfParams& p)
{
    if (xi.size() != grid.size() || xj.size() != grid.size())
        throw ShapeError("d_omega: profile length does not match the grid");
    double acc = 0.0;
    double prev = alf_weight(grid[0], p) * (xi(0) - xj(0)) * (xi(0) - xj(0));
    for (Index k = 1; k < grid.size(); ++k) {
        double diff = xi(k) - xj(k);
        double cur = alf_weight(grid[k], p) * diff * diff;
        acc += (grid[k] - grid[k - 1]) * 0.5 * (cur + prev);
        prev = cur;
    }
    return acc / (phi * phi);
}

/// sum_k (x_ik - x_jk)^2 / sigma_k^2.
inline double d_ard(const VectorXd& xi, const VectorXd& xj, const VectorXd& sigma)
{
    if (xi.size() != xj.size() || xi.size() != sigma.size())
        throw ShapeError("d_ard: length mismatch");
    return ((xi - xj).array() / sigma.array()).square().sum();
}

/// Same form as d_ard, applied to principal-component score vectors.
inline double d_pc(const VectorXd& score_i, const VectorXd& score_j, const VectorXd& sigma)
{
    if (score_i.size() != score_j.size() || score_i.size() != sigma.size())
        throw ShapeError("d_pc: length mismatch");
    return d_ard(score_i, score_j, sigma);
}

/// Squared-exponential covariance sigma_f^2 exp(-D/2); the noise variance is
/// added on the diagonal when requested (square self-covariance only).
inline MatrixXd covariance(const MatrixXd& distances, double sigma_f, double sigma_eps, bool add_noise)
{
    MatrixXd s = (sigma_f * sigma_f) * (-0.5 * distances.array()).exp();
    if (add_noise) {
        if (distances.rows() != distances.cols())
            throw ShapeError("covariance: noise can only be added to a square self-covariance");
        s.diagonal().array() += sigma_eps * sigma_eps;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Kernel specification
// ---------------------------------------------------------------------------

/// The seven model configurations.
enum class ModelKind { SE, ARD, FPCA, FFPCA, Edn, SDE, ADE };

inline constexpr ModelKind all_model_kinds[] = {ModelKind::SE,    ModelKind::ARD, ModelKind::FPCA, ModelKind::FFPCA,
                                                ModelKind::Edn,   ModelKind::SDE, ModelKind::ADE};

inline std::string_view model_name(ModelKind m)
{
    switch (m) {
    case ModelKind::SE: return "SE";
    case ModelKind::ARD: return "ARD";
    case ModelKind::FPCA: return "FPCA";
    case ModelKind::FFPCA: return "FFPCA";
    case ModelKind::Edn: return "Edn";
    case ModelKind::SDE: return "SDE";
    case ModelKind::ADE: return "ADE";
    }
    return "?";
}

/// Display label, e.g. "viGP-ARD" or "fiGP-SDE".
inline std::string model_label(ModelKind m)
{
    bool functional = m == ModelKind::Edn || m == ModelKind::SDE || m == ModelKind::ADE;
    return std::string(functional ? "fiGP-" : "viGP-") + std::string(model_name(m));
}

inline ModelKind parse_model(std::string_view s)
{
    for (auto m : all_model_kinds)
        if (s == model_name(m) || s == model_label(m))
            return m;
    throw ConfigError("unknown model '" + std::string(s) + "'");
}

inline bool is_functional(ModelKind m) { return m == ModelKind::Edn || m == ModelKind::SDE || m == ModelKind::ADE; }
inline bool is_pca(ModelKind m) { return m == ModelKind::FPCA || m == ModelKind::FFPCA; }

/// Shared length-scale over all grid points.
struct SeDistance {
    double sigma_x = 1.0;
};
/// One length-scale per grid point.
struct ArdDistance {
    VectorXd sigma_x;
};
/// One length-scale per retained principal component.
struct PcDistance {
    VectorXd sigma_x;
};
/// Weighted functional norm with an ALF weight.
struct FunctionalDistance {
    double phi = 1.0;
    AlfParams alf;
};

using DistanceSpec = std::variant<SeDistance, ArdDistance, PcDistance, FunctionalDistance>;

struct KernelSpec {
    DistanceSpec distance;
    double sigma_f = 1.0;
    double sigma_eps = 0.1;

    bool valid() const
    {
        if (!(sigma_f >= 0.0 && sigma_eps >= 0.0 && sigma_f + sigma_eps > 0.0))
            return false;
        return std::visit(
            [](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, SeDistance>)
                    return d.sigma_x > 0.0 && std::isfinite(d.sigma_x);
                else if constexpr (std::is_same_v<T, FunctionalDistance>)
                    return d.phi > 0.0 && std::isfinite(d.phi) && d.alf.valid();
                else
                    return d.sigma_x.size() > 0 && (d.sigma_x.array() > 0.0).all() && d.sigma_x.allFinite();
            },
            distance);
    }
};

/// Per-feature coefficients w such that d(x_i, x_j) = sum_k w_k (x_ik - x_jk)^2.
/// Every distance family has this form; for the functional norm the
/// coefficients fold in the trapezoid weights, the ALF weight and phi^-2.
inline VectorXd feature_weights(const KernelSpec& spec, const IndexGrid* grid, Index n_features)
{
    return std::visit(
        [&](const auto& d) -> VectorXd {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, SeDistance>) {
                return VectorXd::Constant(n_features, 1.0 / (d.sigma_x * d.sigma_x));
            } else if constexpr (std::is_same_v<T, FunctionalDistance>) {
                if (grid == nullptr || grid->size() != n_features)
                    throw ShapeError("functional distance requires the profile grid");
                VectorXd c = grid->trapezoid_weights();
                return c.cwiseProduct(alf_weights(*grid, d.alf)) / (d.phi * d.phi);
            } else {
                if (d.sigma_x.size() != n_features)
                    throw ShapeError("length-scale vector has " + std::to_string(d.sigma_x.size()) +
                                     " entries for " + std::to_string(n_features) + " features");
                return d.sigma_x.array().square().inverse().matrix();
            }
        },
        spec.distance);
}

// ---------------------------------------------------------------------------
// Squared-difference caches
// ---------------------------------------------------------------------------

/// Precomputed (x_ik - x_jk)^2 for all pairs i < j of one feature matrix.
/// Distances for any weight vector are then a single matrix-vector product.
class PairwiseSquares {
public:
    PairwiseSquares() = default;

    explicit PairwiseSquares(const MatrixXd& x) : n_(x.rows()), p_(x.cols())
    {
        sq_.resize(n_ * (n_ - 1) / 2, p_);
        Index r = 0;
        for (Index j = 1; j < n_; ++j)
            for (Index i = 0; i < j; ++i)
                sq_.row(r++) = (x.row(i) - x.row(j)).array().square();
    }

    Index points() const noexcept { return n_; }
    Index features() const noexcept { return p_; }
    const MatrixXd& squares() const noexcept { return sq_; }

    /// Full symmetric N x N distance matrix with zero diagonal.
    MatrixXd distances(const VectorXd& w) const
    {
        VectorXd d = sq_ * w;
        MatrixXd out = MatrixXd::Zero(n_, n_);
        Index r = 0;
        for (Index j = 1; j < n_; ++j)
            for (Index i = 0; i < j; ++i) {
                out(i, j) = d(r);
                out(j, i) = d(r);
                ++r;
            }
        return out;
    }

    /// g_k = sum_{i<j} A_ij (x_ik - x_jk)^2 for a symmetric matrix A.
    VectorXd contract(const MatrixXd& a) const
    {
        VectorXd packed(sq_.rows());
        Index r = 0;
        for (Index j = 1; j < n_; ++j)
            for (Index i = 0; i < j; ++i)
                packed(r++) = a(i, j);
        return sq_.transpose() * packed;
    }

private:
    Index n_ = 0;
    Index p_ = 0;
    MatrixXd sq_;
};

/// Rectangular distance matrix between two feature matrices for weights w.
inline MatrixXd cross_distances(const MatrixXd& a, const MatrixXd& b, const VectorXd& w)
{
    if (a.cols() != b.cols() || a.cols() != w.size())
        throw ShapeError("cross_distances: feature dimension mismatch");
    const MatrixXd at = a.transpose(), bt = b.transpose();
    const Index p = w.size();
    MatrixXd out(a.rows(), b.rows());
    for (Index j = 0; j < b.rows(); ++j) {
        const double* bj = bt.col(j).data();
        for (Index i = 0; i < a.rows(); ++i) {
            const double* ai = at.col(i).data();
            double s = 0.0;
            for (Index k = 0; k < p; ++k) {
                double d = ai[k] - bj[k];
                s += w(k) * d * d;
            }
            out(i, j) = s;
        }
    }
    return out;
}

} // namespace figp

#endif
