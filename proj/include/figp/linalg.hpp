#ifndef FIGP_LINALG_HPP
#define FIGP_LINALG_HPP

#include <cmath>
#include <cstdio>
#include <string>

#include <Eigen/Dense>

#include "figp/error.hpp"

namespace figp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Lower Cholesky factor together with the diagonal jitter that was needed.
struct JitteredCholesky {
    Eigen::LLT<MatrixXd> llt;
    double jitter = 0.0;

    double log_det() const { return 2.0 * llt.matrixLLT().diagonal().array().log().sum(); }
};

namespace detail {

inline bool factor_ok(const Eigen::LLT<MatrixXd>& llt)
{
    if (llt.info() != Eigen::Success)
        return false;
    const auto& m = llt.matrixLLT();
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        if (!(m(i, i) > 0.0) || !std::isfinite(m(i, i)))
            return false;
    return true;
}

} // namespace detail

/// Factor a symmetric matrix, escalating a diagonal jitter from 1e-10 to 1e-4
/// times `scale` (doubling) when the plain factorization fails. The scale
/// defaults to the absolute mean diagonal.
inline JitteredCholesky cholesky_with_jitter(const MatrixXd& a, double scale = 0.0)
{
    JitteredCholesky out;
    if (!a.allFinite())
        throw NumericalError("covariance matrix has non-finite entries");
    out.llt.compute(a);
    if (detail::factor_ok(out.llt))
        return out;

    if (!(scale > 0.0))
        scale = std::max(std::abs(a.diagonal().mean()), 1e-300);
    double jitter = 1e-10 * scale;
    const double max_jitter = 1e-4 * scale;
    MatrixXd work = a;
    while (jitter <= max_jitter * (1.0 + 1e-12)) {
        work.diagonal() = a.diagonal().array() + jitter;
        out.llt.compute(work);
        if (detail::factor_ok(out.llt)) {
            out.jitter = jitter;
            return out;
        }
        jitter *= 2.0;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", jitter / 2.0);
    throw NumericalError(std::string("Cholesky factorization failed after jitter ") + buf, jitter / 2.0);
}

/// log|A| from a factor: 2 * sum(log L_ii).
inline double log_det(const Eigen::LLT<MatrixXd>& llt)
{
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

} // namespace figp

#endif
