#ifndef FIGP_FPCA_HPP
#define FIGP_FPCA_HPP

#include <cmath>

#include <Eigen/Dense>

#include "figp/bspline.hpp"
#include "figp/data.hpp"
#include "figp/error.hpp"

namespace figp {

/// Principal components of B-spline coefficients of training profiles.
struct FpcaModel {
    BasisSystem system;
    VectorXd mean;        // L mean coefficients
    MatrixXd loadings;    // L x L, columns are components
    VectorXd eigenvalues; // descending, >= 0
    Index k99 = 0;
    bool degenerate = false;

    Index components() const noexcept { return eigenvalues.size(); }

    /// Cumulative explained-variance fraction per component count.
    VectorXd cumulative_variance() const
    {
        VectorXd c(eigenvalues.size());
        double total = eigenvalues.sum();
        double run = 0.0;
        for (Index i = 0; i < eigenvalues.size(); ++i) {
            run += eigenvalues(i);
            c(i) = total > 0.0 ? run / total : 1.0;
        }
        return c;
    }
};

/// Smallest count of leading components whose cumulative variance reaches `level`.
inline Index components_for(const VectorXd& eigenvalues, double level)
{
    double total = eigenvalues.sum();
    if (!(total > 0.0))
        return 1;
    double run = 0.0;
    for (Index i = 0; i < eigenvalues.size(); ++i) {
        run += eigenvalues(i);
        if (run >= (level - 1e-12) * total)
            return i + 1;
    }
    return eigenvalues.size();
}

inline FpcaModel fit_fpca(const MatrixXd& x, const BasisSystem& system)
{
    if (x.rows() < 2)
        throw DataError("fpca: need at least two profiles");
    MatrixXd c = system.coefficients(x);
    FpcaModel m{system, c.colwise().mean().transpose(), {}, {}, 0, false};
    MatrixXd centered = c.rowwise() - m.mean.transpose();
    MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw NumericalError("fpca: eigendecomposition failed");
    const Index l = cov.rows();
    m.eigenvalues.resize(l);
    m.loadings.resize(l, l);
    for (Index i = 0; i < l; ++i) {
        m.eigenvalues(i) = std::max(0.0, es.eigenvalues()(l - 1 - i));
        VectorXd v = es.eigenvectors().col(l - 1 - i);
        Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0)
            v = -v;
        m.loadings.col(i) = v;
    }
    // Rounding noise from identical profiles counts as zero variance.
    m.degenerate = !(m.eigenvalues.sum() > 1e-14 * std::max(1.0, m.mean.squaredNorm()));
    if (m.degenerate)
        m.eigenvalues.setZero();
    m.k99 = components_for(m.eigenvalues, 0.99);
    return m;
}

inline FpcaModel fit_fpca(const Dataset& d, int n_interior = 8)
{
    return fit_fpca(d.inputs(), fit_basis(d.grid(), n_interior));
}

/// Scores of new profiles under a trained model, truncated to `n` leading
/// components (all when n < 0).
inline MatrixXd transform(const FpcaModel& m, const MatrixXd& x, Index n = -1)
{
    if (n < 0)
        n = m.components();
    if (n > m.components())
        throw ConfigError("fpca: more components requested than available");
    MatrixXd centered = m.system.coefficients(x).rowwise() - m.mean.transpose();
    return centered * m.loadings.leftCols(n);
}

inline MatrixXd transform(const FpcaModel& m, const Dataset& d, Index n = -1)
{
    if (!(d.grid() == m.system.grid))
        throw ShapeError("fpca: grid differs from the training grid");
    return transform(m, d.inputs(), n);
}

} // namespace figp

#endif
