#ifndef FIGP_PRIORS_HPP
#define FIGP_PRIORS_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "figp/error.hpp"
#include "figp/kernel.hpp"
#include "figp/random.hpp"

namespace figp {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// One-dimensional prior families
// ---------------------------------------------------------------------------

struct Flat {};
struct InverseGamma {
    double shape = 5.0;
    double scale = 5.0;
};
struct Beta {
    double a = 1.0;
    double b = 1.0;
};
/// Normal(0, scale) truncated to [0, inf).
struct HalfNormal {
    double scale = 1.0;
};
struct Normal {
    double mean = 0.0;
    double sd = 1.0;
};

using Prior1D = std::variant<Flat, InverseGamma, Beta, HalfNormal, Normal>;

inline double log_pdf(const Prior1D& prior, double x)
{
    if (std::isnan(x))
        return neg_inf;
    return std::visit(
        [x](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Flat>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, InverseGamma>) {
                if (!(x > 0.0))
                    return neg_inf;
                return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * std::log(x) -
                       p.scale / x;
            } else if constexpr (std::is_same_v<T, Beta>) {
                if (x < 0.0 || x > 1.0)
                    return neg_inf;
                double lb = std::lgamma(p.a) + std::lgamma(p.b) - std::lgamma(p.a + p.b);
                double left = p.a == 1.0 ? 0.0 : (p.a - 1.0) * std::log(x);
                double right = p.b == 1.0 ? 0.0 : (p.b - 1.0) * std::log1p(-x);
                return left + right - lb;
            } else if constexpr (std::is_same_v<T, HalfNormal>) {
                if (x < 0.0)
                    return neg_inf;
                double z = x / p.scale;
                return std::log(2.0) - std::log(p.scale) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
            } else {
                double z = (x - p.mean) / p.sd;
                return -std::log(p.sd) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
            }
        },
        prior);
}

/// d/dx log_pdf at an interior point of the support.
inline double dlog_pdf(const Prior1D& prior, double x)
{
    return std::visit(
        [x](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Flat>)
                return 0.0;
            else if constexpr (std::is_same_v<T, InverseGamma>)
                return -(p.shape + 1.0) / x + p.scale / (x * x);
            else if constexpr (std::is_same_v<T, Beta>)
                return (p.a - 1.0) / x - (p.b - 1.0) / (1.0 - x);
            else if constexpr (std::is_same_v<T, HalfNormal>)
                return -x / (p.scale * p.scale);
            else
                return -(x - p.mean) / (p.sd * p.sd);
        },
        prior);
}

// ---------------------------------------------------------------------------
// Parameter layout and support transforms
// ---------------------------------------------------------------------------

/// What a slot of the parameter vector means.
enum class ParamRole { LengthScale, Phi, Tau, Lambda, LogKappa, SigmaF, SigmaEps };

/// Constrained -> unconstrained map of one slot.
enum class TransformKind { Log, Logit, Identity };

inline TransformKind transform_for(ParamRole r)
{
    switch (r) {
    case ParamRole::Tau: return TransformKind::Logit;
    case ParamRole::LogKappa: return TransformKind::Identity;
    default: return TransformKind::Log;
    }
}

inline bool in_support(ParamRole r, double x)
{
    if (!std::isfinite(x))
        return false;
    switch (r) {
    case ParamRole::Tau: return x >= 0.0 && x <= 1.0;
    case ParamRole::LogKappa: return true;
    case ParamRole::SigmaF:
    case ParamRole::SigmaEps: return x >= 0.0;
    default: return x > 0.0;
    }
}

/// One transform: value, derivative of the constraining map, log-Jacobian and
/// its derivative, all as functions of the unconstrained coordinate.
struct Transform {
    TransformKind kind = TransformKind::Log;

    double constrain(double u) const
    {
        switch (kind) {
        case TransformKind::Log: return std::exp(u);
        case TransformKind::Logit: return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u));
        default: return u;
        }
    }
    double unconstrain(double x) const
    {
        switch (kind) {
        case TransformKind::Log: return std::log(x);
        case TransformKind::Logit: return std::log(x) - std::log1p(-x);
        default: return x;
        }
    }
    /// dx/du
    double jacobian(double u) const
    {
        switch (kind) {
        case TransformKind::Log: return std::exp(u);
        case TransformKind::Logit: {
            double x = constrain(u);
            return x * (1.0 - x);
        }
        default: return 1.0;
        }
    }
    double log_jacobian(double u) const
    {
        switch (kind) {
        case TransformKind::Log: return u;
        case TransformKind::Logit: return -std::abs(u) - 2.0 * std::log1p(std::exp(-std::abs(u)));
        default: return 0.0;
        }
    }
    double dlog_jacobian(double u) const
    {
        switch (kind) {
        case TransformKind::Log: return 1.0;
        case TransformKind::Logit: return 1.0 - 2.0 * constrain(u);
        default: return 0.0;
        }
    }
};

/// Maps a model's parameter vector to a KernelSpec. The slot order is the
/// distance parameters followed by sigma_f and sigma_eps:
///   SE: sigma_x | ARD, FPCA, FFPCA: sigma_x[1..P] | Edn: phi, lambda
///   SDE: phi, tau, lambda | ADE: phi, tau, lambda, log_kappa
class ParamLayout {
public:
    ParamLayout() = default;

    /// n_features is K for SE/ARD and the fiGP models, and the retained
    /// component count for FPCA/FFPCA.
    ParamLayout(ModelKind kind, Index n_features) : kind_(kind), n_features_(n_features)
    {
        if (n_features < 1)
            throw ConfigError("parameter layout needs at least one feature");
        switch (kind) {
        case ModelKind::SE:
            add(ParamRole::LengthScale, "sigma_x");
            break;
        case ModelKind::ARD:
        case ModelKind::FPCA:
        case ModelKind::FFPCA:
            for (Index k = 0; k < n_features; ++k)
                add(ParamRole::LengthScale, "sigma_x[" + std::to_string(k + 1) + "]");
            break;
        case ModelKind::Edn:
            add(ParamRole::Phi, "phi");
            add(ParamRole::Lambda, "lambda");
            break;
        case ModelKind::SDE:
            add(ParamRole::Phi, "phi");
            add(ParamRole::Tau, "tau");
            add(ParamRole::Lambda, "lambda");
            break;
        case ModelKind::ADE:
            add(ParamRole::Phi, "phi");
            add(ParamRole::Tau, "tau");
            add(ParamRole::Lambda, "lambda");
            add(ParamRole::LogKappa, "log_kappa");
            break;
        }
        add(ParamRole::SigmaF, "sigma_f");
        add(ParamRole::SigmaEps, "sigma_eps");
    }

    ModelKind kind() const noexcept { return kind_; }
    Index features() const noexcept { return n_features_; }
    Index dim() const noexcept { return static_cast<Index>(roles_.size()); }
    const std::vector<ParamRole>& roles() const noexcept { return roles_; }
    const std::vector<std::string>& names() const noexcept { return names_; }
    Transform transform(Index i) const { return {transform_for(roles_[static_cast<std::size_t>(i)])}; }

    Index index_of(ParamRole r) const
    {
        for (std::size_t i = 0; i < roles_.size(); ++i)
            if (roles_[i] == r)
                return static_cast<Index>(i);
        return -1;
    }

    bool in_support(const VectorXd& theta) const
    {
        if (theta.size() != dim())
            return false;
        for (Index i = 0; i < dim(); ++i)
            if (!figp::in_support(roles_[static_cast<std::size_t>(i)], theta(i)))
                return false;
        return theta(dim() - 2) + theta(dim() - 1) > 0.0;
    }

    KernelSpec to_spec(const VectorXd& theta) const
    {
        if (theta.size() != dim())
            throw ShapeError("parameter vector has " + std::to_string(theta.size()) + " entries, layout expects " +
                             std::to_string(dim()));
        KernelSpec s;
        s.sigma_f = theta(dim() - 2);
        s.sigma_eps = theta(dim() - 1);
        switch (kind_) {
        case ModelKind::SE: s.distance = SeDistance{theta(0)}; break;
        case ModelKind::ARD: s.distance = ArdDistance{theta.head(n_features_)}; break;
        case ModelKind::FPCA:
        case ModelKind::FFPCA: s.distance = PcDistance{theta.head(n_features_)}; break;
        case ModelKind::Edn: s.distance = FunctionalDistance{theta(0), AlfParams::edn(theta(1))}; break;
        case ModelKind::SDE: s.distance = FunctionalDistance{theta(0), AlfParams::sde(theta(1), theta(2))}; break;
        case ModelKind::ADE:
            s.distance = FunctionalDistance{theta(0), AlfParams::ade(theta(1), theta(2), std::exp(theta(3)))};
            break;
        }
        return s;
    }

    VectorXd from_spec(const KernelSpec& s) const
    {
        VectorXd theta(dim());
        theta(dim() - 2) = s.sigma_f;
        theta(dim() - 1) = s.sigma_eps;
        std::visit(
            [&](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, SeDistance>) {
                    require(kind_ == ModelKind::SE);
                    theta(0) = d.sigma_x;
                } else if constexpr (std::is_same_v<T, FunctionalDistance>) {
                    require(is_functional(kind_));
                    theta(0) = d.phi;
                    if (kind_ == ModelKind::Edn) {
                        theta(1) = d.alf.lambda;
                    } else {
                        theta(1) = d.alf.tau;
                        theta(2) = d.alf.lambda;
                        if (kind_ == ModelKind::ADE)
                            theta(3) = std::log(d.alf.kappa);
                    }
                } else {
                    require(d.sigma_x.size() == n_features_ && kind_ != ModelKind::SE && !is_functional(kind_));
                    theta.head(n_features_) = d.sigma_x;
                }
            },
            s.distance);
        return theta;
    }

    VectorXd constrain(const VectorXd& u) const
    {
        VectorXd theta(dim());
        for (Index i = 0; i < dim(); ++i)
            theta(i) = transform(i).constrain(u(i));
        return theta;
    }

    VectorXd unconstrain(const VectorXd& theta) const
    {
        VectorXd u(dim());
        for (Index i = 0; i < dim(); ++i)
            u(i) = transform(i).unconstrain(theta(i));
        return u;
    }

    /// sum_i log |dtheta_i / du_i|
    double log_jacobian(const VectorXd& u) const
    {
        double s = 0.0;
        for (Index i = 0; i < dim(); ++i)
            s += transform(i).log_jacobian(u(i));
        return s;
    }

    /// Monitored relevance weights for a constrained vector: omega(t_k) for
    /// the fiGP models, sigma_k^-2 for the vector-input models.
    VectorXd relevance_weights(const VectorXd& theta, const IndexGrid* grid) const
    {
        KernelSpec s = to_spec(theta);
        return std::visit(
            [&](const auto& d) -> VectorXd {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, SeDistance>)
                    return VectorXd::Constant(1, 1.0 / (d.sigma_x * d.sigma_x));
                else if constexpr (std::is_same_v<T, FunctionalDistance>) {
                    if (grid == nullptr)
                        throw ShapeError("relevance weights of a functional model need the grid");
                    return alf_weights(*grid, d.alf);
                } else
                    return d.sigma_x.array().square().inverse().matrix();
            },
            s.distance);
    }

private:
    void add(ParamRole r, std::string name)
    {
        roles_.push_back(r);
        names_.push_back(std::move(name));
    }
    void require(bool ok) const
    {
        if (!ok)
            throw ShapeError("kernel spec does not match the " + std::string(model_name(kind_)) + " layout");
    }

    ModelKind kind_ = ModelKind::SE;
    Index n_features_ = 0;
    std::vector<ParamRole> roles_;
    std::vector<std::string> names_;
};

// ---------------------------------------------------------------------------
// Prior set
// ---------------------------------------------------------------------------

/// Independent priors per parameter role. Defaults:
/// phi, length-scales ~ InvGamma(5, 5); tau ~ Beta(1, 1);
/// 10^-1/2 lambda ~ N+(0, 1), i.e. lambda ~ N+(0, sqrt(10));
/// log kappa ~ N(0, 1); sigma_f, sigma_eps ~ N+(0, 1).
struct PriorSet {
    Prior1D length_scale = InverseGamma{5.0, 5.0};
    Prior1D phi = InverseGamma{5.0, 5.0};
    Prior1D tau = Beta{1.0, 1.0};
    Prior1D lambda = HalfNormal{std::sqrt(10.0)};
    Prior1D log_kappa = Normal{0.0, 1.0};
    Prior1D sigma_f = HalfNormal{1.0};
    Prior1D sigma_eps = HalfNormal{1.0};

    static PriorSet defaults() { return {}; }

    /// Improper flat priors over each parameter's support.
    static PriorSet flat() { return {Flat{}, Flat{}, Flat{}, Flat{}, Flat{}, Flat{}, Flat{}}; }

    const Prior1D& for_role(ParamRole r) const
    {
        switch (r) {
        case ParamRole::LengthScale: return length_scale;
        case ParamRole::Phi: return phi;
        case ParamRole::Tau: return tau;
        case ParamRole::Lambda: return lambda;
        case ParamRole::LogKappa: return log_kappa;
        case ParamRole::SigmaF: return sigma_f;
        case ParamRole::SigmaEps: return sigma_eps;
        }
        return sigma_eps;
    }
};

/// Joint prior log-density of a constrained parameter vector; -inf off support.
inline double log_density(const PriorSet& priors, const ParamLayout& layout, const VectorXd& theta)
{
    if (!layout.in_support(theta))
        return neg_inf;
    double s = 0.0;
    for (Index i = 0; i < layout.dim(); ++i)
        s += log_pdf(priors.for_role(layout.roles()[static_cast<std::size_t>(i)]), theta(i));
    return s;
}

/// Gradient of log_density with respect to the constrained vector.
inline VectorXd grad_log_density(const PriorSet& priors, const ParamLayout& layout, const VectorXd& theta)
{
    VectorXd g(layout.dim());
    for (Index i = 0; i < layout.dim(); ++i)
        g(i) = dlog_pdf(priors.for_role(layout.roles()[static_cast<std::size_t>(i)]), theta(i));
    return g;
}

// ---------------------------------------------------------------------------
// Random initialization
// ---------------------------------------------------------------------------

/// n random starting points (constrained). Length-scales and phi ~ N+(0, 1),
/// sigma_f / 5 ~ N+(0, 1), 2 sigma_eps ~ N+(0, 1), the two ALF rates
/// ~ iid C+(0, 1) and tau ~ Beta(2/3, 1).
inline std::vector<VectorXd> draw_init(int n, const ParamLayout& layout, std::uint64_t seed)
{
    if (n < 1)
        throw ConfigError("draw_init: n must be positive");
    Rng rng(seed);
    auto positive = [&](auto draw) {
        double x = draw();
        while (!(x > 0.0) || !std::isfinite(x))
            x = draw();
        return x;
    };
    std::vector<VectorXd> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        VectorXd theta(layout.dim());
        double l1 = positive([&] { return half_cauchy(rng); });
        double l2 = positive([&] { return half_cauchy(rng); });
        for (Index i = 0; i < layout.dim(); ++i) {
            switch (layout.roles()[static_cast<std::size_t>(i)]) {
            case ParamRole::LengthScale:
            case ParamRole::Phi: theta(i) = positive([&] { return half_normal(rng); }); break;
            case ParamRole::Tau: {
                double t = beta_a1(rng, 2.0 / 3.0);
                while (!(t > 0.0 && t < 1.0))
                    t = beta_a1(rng, 2.0 / 3.0);
                theta(i) = t;
                break;
            }
            case ParamRole::Lambda: theta(i) = std::sqrt(l1 * l2); break;
            case ParamRole::LogKappa: theta(i) = 0.5 * (std::log(l2) - std::log(l1)); break;
            case ParamRole::SigmaF: theta(i) = positive([&] { return 5.0 * half_normal(rng); }); break;
            case ParamRole::SigmaEps: theta(i) = positive([&] { return 0.5 * half_normal(rng); }); break;
            }
        }
        out.push_back(std::move(theta));
    }
    return out;
}

} // namespace figp

#endif
