#ifndef FIGP_GP_HPP
#define FIGP_GP_HPP

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <utility>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"
#include "figp/kernel.hpp"
#include "figp/linalg.hpp"
#include "figp/priors.hpp"

namespace figp {

inline constexpr double log_two_pi = 1.8378770664093454836; // log(2 pi)

/// Inputs of a GP in the space its distance acts on: raw profiles (with their
/// grid) for SE/ARD/fiGP, principal-component scores for FPCA/FFPCA.
/// Pairwise squared differences are computed once on construction.
class GpData {
public:
    GpData() = default;

    GpData(MatrixXd features, VectorXd outputs, std::optional<IndexGrid> grid = std::nullopt)
        : features_(std::move(features)), outputs_(std::move(outputs)), grid_(std::move(grid))
    {
        if (features_.rows() != outputs_.size())
            throw ShapeError("GP data: feature rows and outputs differ in length");
        if (features_.rows() < 1)
            throw DataError("GP data: no observations");
        if (grid_ && grid_->size() != features_.cols())
            throw ShapeError("GP data: grid size does not match profile length");
        if (!features_.allFinite() || !outputs_.allFinite())
            throw DataError("GP data: non-finite values");
        squares_ = std::make_shared<const PairwiseSquares>(features_);
    }

    static GpData from_profiles(const Dataset& d) { return {d.inputs(), d.outputs(), d.grid()}; }

    Index size() const noexcept { return outputs_.size(); }
    Index features() const noexcept { return features_.cols(); }
    const MatrixXd& inputs() const noexcept { return features_; }
    const VectorXd& outputs() const noexcept { return outputs_; }
    const IndexGrid* grid() const noexcept { return grid_ ? &*grid_ : nullptr; }
    const PairwiseSquares& squares() const { return *squares_; }

private:
    MatrixXd features_;
    VectorXd outputs_;
    std::optional<IndexGrid> grid_;
    std::shared_ptr<const PairwiseSquares> squares_;
};

/// S_y = S_f + (sigma_eps^2) I together with its factor. The signal part S_f
/// is kept for gradient evaluation.
struct TrainingCovariance {
    MatrixXd signal;
    JitteredCholesky chol;
};

inline TrainingCovariance training_covariance(const KernelSpec& spec, const GpData& data)
{
    VectorXd w = feature_weights(spec, data.grid(), data.features());
    TrainingCovariance tc;
    tc.signal = covariance(data.squares().distances(w), spec.sigma_f, 0.0, false);
    MatrixXd sy = tc.signal;
    sy.diagonal().array() += spec.sigma_eps * spec.sigma_eps;
    tc.chol = cholesky_with_jitter(sy);
    return tc;
}

/// log p(y | X, theta) with zero mean, via Cholesky. Throws NumericalError when
/// the covariance cannot be factored even with the maximum jitter.
inline double log_marginal(const KernelSpec& spec, const GpData& data)
{
    if (!spec.valid())
        throw ConfigError("log_marginal: invalid kernel parameters");
    TrainingCovariance tc = training_covariance(spec, data);
    VectorXd alpha = tc.chol.llt.solve(data.outputs());
    return -0.5 * data.outputs().dot(alpha) - 0.5 * tc.chol.log_det() -
           0.5 * static_cast<double>(data.size()) * log_two_pi;
}

inline double log_marginal(const KernelSpec& spec, const Dataset& data)
{
    return log_marginal(spec, GpData::from_profiles(data));
}

/// Unnormalized log posterior log p(y | X, theta) + log p(theta) over the
/// constrained parameters. Off-support or unfactorable points give -inf.
inline double log_posterior(const KernelSpec& spec, const GpData& data, const PriorSet& priors,
                            const ParamLayout& layout)
{
    VectorXd theta = layout.from_spec(spec);
    double lp = log_density(priors, layout, theta);
    if (!std::isfinite(lp) || !spec.valid())
        return neg_inf;
    try {
        return log_marginal(spec, data) + lp;
    } catch (const NumericalError&) {
        return neg_inf;
    }
}

/// Log posterior and gradient in the unconstrained coordinates of a layout:
/// log p(y | X, theta(u)) + log p(theta(u)) + log |dtheta/du|.
class PosteriorDensity {
public:
    PosteriorDensity(ParamLayout layout, GpData data, PriorSet priors)
        : layout_(std::move(layout)), data_(std::move(data)), priors_(std::move(priors))
    {
        if (layout_.features() != data_.features())
            throw ShapeError("posterior: layout expects " + std::to_string(layout_.features()) + " features, data has " +
                             std::to_string(data_.features()));
        if (is_functional(layout_.kind()) && data_.grid() == nullptr)
            throw ShapeError("posterior: functional models need the index grid");
    }

    const ParamLayout& layout() const noexcept { return layout_; }
    const GpData& data() const noexcept { return data_; }
    const PriorSet& priors() const noexcept { return priors_; }
    Index dim() const noexcept { return layout_.dim(); }

    /// Constrained-space log posterior (no Jacobian).
    double log_posterior(const VectorXd& theta) const
    {
        return figp::log_posterior(layout_.to_spec(theta), data_, priors_, layout_);
    }

    /// Unconstrained log density; -inf when undefined.
    double operator()(const VectorXd& u) const
    {
        VectorXd theta = layout_.constrain(u);
        double lp = log_posterior(theta);
        if (!std::isfinite(lp))
            return neg_inf;
        return lp + layout_.log_jacobian(u);
    }

    /// Unconstrained log density and its gradient. Returns -inf (gradient
    /// unspecified) when the point is off support or cannot be factored.
    double value_and_gradient(const VectorXd& u, VectorXd& grad) const
    {
        grad.setZero(dim());
        VectorXd theta = layout_.constrain(u);
        double lprior = log_density(priors_, layout_, theta);
        if (!std::isfinite(lprior))
            return neg_inf;
        KernelSpec spec = layout_.to_spec(theta);
        if (!spec.valid())
            return neg_inf;

        VectorXd w = feature_weights(spec, data_.grid(), data_.features());
        MatrixXd sf = covariance(data_.squares().distances(w), spec.sigma_f, 0.0, false);
        MatrixXd sy = sf;
        sy.diagonal().array() += spec.sigma_eps * spec.sigma_eps;
        JitteredCholesky chol;
        try {
            chol = cholesky_with_jitter(sy);
        } catch (const NumericalError&) {
            return neg_inf;
        }
        const Index n = data_.size();
        VectorXd alpha = chol.llt.solve(data_.outputs());
        double lml = -0.5 * data_.outputs().dot(alpha) - 0.5 * chol.log_det() - 0.5 * static_cast<double>(n) * log_two_pi;
        if (!std::isfinite(lml))
            return neg_inf;

        // W = alpha alpha^T - S_y^-1; dL/dtheta = 0.5 tr(W dS_y/dtheta).
        MatrixXd wmat = -chol.llt.solve(MatrixXd::Identity(n, n));
        wmat.noalias() += alpha * alpha.transpose();
        MatrixXd a = wmat.cwiseProduct(sf);

        // dL/dw_k = -1/2 sum_{i<j} A_ij sq_ijk
        VectorXd dl_dw = -0.5 * data_.squares().contract(a);
        double dl_dlog_sf = a.sum();
        double dl_dlog_se = spec.sigma_eps * spec.sigma_eps * wmat.trace();

        VectorXd dl_du = VectorXd::Zero(dim());
        const Index d = dim();
        dl_du(d - 2) = dl_dlog_sf;
        dl_du(d - 1) = dl_dlog_se;
        distance_gradient(spec, w, dl_dw, theta, dl_du);

        // Prior and Jacobian terms, chain-ruled into u.
        VectorXd gp = grad_log_density(priors_, layout_, theta);
        for (Index i = 0; i < d; ++i) {
            Transform tr = layout_.transform(i);
            grad(i) = dl_du(i) + gp(i) * tr.jacobian(u(i)) + tr.dlog_jacobian(u(i));
        }
        return lml + lprior + layout_.log_jacobian(u);
    }

private:
    /// Adds dL/du for the distance parameters given dL/dw.
    void distance_gradient(const KernelSpec& spec, const VectorXd& w, const VectorXd& dl_dw, const VectorXd& theta,
                           VectorXd& dl_du) const
    {
        switch (layout_.kind()) {
        case ModelKind::SE:
            // w_k = sigma^-2 for all k; dw/dlog sigma = -2 w
            dl_du(0) = -2.0 * dl_dw.dot(w);
            break;
        case ModelKind::ARD:
        case ModelKind::FPCA:
        case ModelKind::FFPCA:
            dl_du.head(layout_.features()) = -2.0 * dl_dw.cwiseProduct(w);
            break;
        case ModelKind::Edn:
        case ModelKind::SDE:
        case ModelKind::ADE: {
            const auto& fd = std::get<FunctionalDistance>(spec.distance);
            const IndexGrid& grid = *data_.grid();
            VectorXd c = grid.trapezoid_weights() / (fd.phi * fd.phi);
            double g_tau = 0.0, g_loglam = 0.0, g_logkap = 0.0;
            for (Index k = 0; k < grid.size(); ++k) {
                AlfWeightDerivs dw = alf_weight_derivs(grid[k], fd.alf);
                double s = dl_dw(k) * c(k);
                g_tau += s * dw.d_tau;
                g_loglam += s * dw.d_log_lambda;
                g_logkap += s * dw.d_log_kappa;
            }
            dl_du(0) = -2.0 * dl_dw.dot(w); // log phi
            if (layout_.kind() == ModelKind::Edn) {
                dl_du(1) = g_loglam;
            } else {
                double tau = theta(1);
                dl_du(1) = g_tau * tau * (1.0 - tau);
                dl_du(2) = g_loglam;
                if (layout_.kind() == ModelKind::ADE)
                    dl_du(3) = g_logkap; // log kappa is itself the unconstrained coordinate
            }
            break;
        }
        }
    }

    ParamLayout layout_;
    GpData data_;
    PriorSet priors_;
};

/// Posterior predictive distribution for a set of test inputs.
struct PredictiveDist {
    VectorXd mean;
    MatrixXd cov;
    /// Prior variance sigma_f^2 + sigma_eps^2; sets the jitter scale when cov is near zero.
    double prior_variance = 0.0;
};

/// A GP conditioned on its training data at fixed kernel parameters. The
/// factor of S_y and alpha = S_y^-1 y are computed once.
class FittedGP {
public:
    FittedGP(KernelSpec spec, GpData train) : spec_(std::move(spec)), train_(std::move(train))
    {
        if (!spec_.valid())
            throw ConfigError("FittedGP: invalid kernel parameters");
        weights_ = feature_weights(spec_, train_.grid(), train_.features());
        TrainingCovariance tc = training_covariance(spec_, train_);
        chol_ = std::move(tc.chol);
        alpha_ = chol_.llt.solve(train_.outputs());
    }

    const KernelSpec& spec() const noexcept { return spec_; }
    const GpData& train() const noexcept { return train_; }
    const VectorXd& alpha() const noexcept { return alpha_; }
    const JitteredCholesky& cholesky() const noexcept { return chol_; }
    const VectorXd& weights() const noexcept { return weights_; }

    /// Predictive mean S_f(X*, X) S_y^-1 y and covariance
    /// S_f(X*, X*) - S_f(X*, X) S_y^-1 S_f(X, X*) (+ sigma_eps^2 I when include_noise).
    PredictiveDist predict(const MatrixXd& x_star, bool include_noise = true) const
    {
        if (x_star.cols() != train_.features())
            throw ShapeError("predict: test inputs have " + std::to_string(x_star.cols()) + " columns, model expects " +
                             std::to_string(train_.features()));
        MatrixXd k_star = covariance(cross_distances(x_star, train_.inputs(), weights_), spec_.sigma_f, 0.0, false);
        MatrixXd k_ss = covariance(cross_distances(x_star, x_star, weights_), spec_.sigma_f, 0.0, false);
        PredictiveDist out;
        out.mean = k_star * alpha_;
        MatrixXd v = chol_.llt.matrixL().solve(k_star.transpose());
        out.cov = k_ss;
        out.cov.noalias() -= v.transpose() * v;
        out.cov = 0.5 * (out.cov + out.cov.transpose());
        if (include_noise)
            out.cov.diagonal().array() += spec_.sigma_eps * spec_.sigma_eps;
        out.prior_variance = spec_.sigma_f * spec_.sigma_f + spec_.sigma_eps * spec_.sigma_eps;
        return out;
    }

    PredictiveDist predict(const Dataset& x_star, bool include_noise = true) const
    {
        if (train_.grid() != nullptr && !(x_star.grid() == *train_.grid()))
            throw ShapeError("predict: test grid differs from the training grid");
        return predict(x_star.inputs(), include_noise);
    }

private:
    KernelSpec spec_;
    GpData train_;
    VectorXd weights_;
    JitteredCholesky chol_;
    VectorXd alpha_;
};

} // namespace figp

#endif
