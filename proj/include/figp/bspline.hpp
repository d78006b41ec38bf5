#ifndef FIGP_BSPLINE_HPP
#define FIGP_BSPLINE_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"

namespace figp {

/// Clamped cubic B-spline basis on [0, 1] with equally spaced interior knots.
/// `n_interior` interior knots give n_interior + 4 basis functions.
class BsplineBasis {
public:
    static constexpr int order = 4;

    explicit BsplineBasis(int n_interior = 8) : n_interior_(n_interior)
    {
        if (n_interior < 0)
            throw ConfigError("bspline: interior knot count must be >= 0");
        for (int i = 0; i < order; ++i)
            knots_.push_back(0.0);
        for (int j = 1; j <= n_interior; ++j)
            knots_.push_back(static_cast<double>(j) / (n_interior + 1));
        for (int i = 0; i < order; ++i)
            knots_.push_back(1.0);
    }

    int interior_knots() const noexcept { return n_interior_; }
    Index size() const noexcept { return static_cast<Index>(n_interior_ + order); }
    const std::vector<double>& knots() const noexcept { return knots_; }

    /// Values of all basis functions at t in [0, 1] (Cox-de Boor recursion).
    VectorXd eval(double t) const
    {
        if (!(t >= 0.0 && t <= 1.0))
            throw DataError("bspline: evaluation point outside [0, 1]");
        const Index nb = size();
        // Knot span: knots_[s] <= t < knots_[s+1], with t = 1 in the last span.
        std::size_t s = order - 1;
        while (s + 1 < knots_.size() - order && t >= knots_[s + 1])
            ++s;
        std::vector<double> n(order, 0.0), left(order, 0.0), right(order, 0.0);
        n[0] = 1.0;
        for (int j = 1; j < order; ++j) {
            left[static_cast<std::size_t>(j)] = t - knots_[s + 1 - static_cast<std::size_t>(j)];
            right[static_cast<std::size_t>(j)] = knots_[s + static_cast<std::size_t>(j)] - t;
            double saved = 0.0;
            for (int r = 0; r < j; ++r) {
                double denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
                double tmp = n[static_cast<std::size_t>(r)] / denom;
                n[static_cast<std::size_t>(r)] = saved + right[static_cast<std::size_t>(r + 1)] * tmp;
                saved = left[static_cast<std::size_t>(j - r)] * tmp;
            }
            n[static_cast<std::size_t>(j)] = saved;
        }
        VectorXd out = VectorXd::Zero(nb);
        for (int r = 0; r < order; ++r)
            out(static_cast<Index>(s) - order + 1 + r) = n[static_cast<std::size_t>(r)];
        return out;
    }

    /// Evaluation matrix B (K x size()) on a grid.
    MatrixXd matrix(const IndexGrid& grid) const
    {
        MatrixXd b(grid.size(), size());
        for (Index k = 0; k < grid.size(); ++k)
            b.row(k) = eval(grid[k]).transpose();
        return b;
    }

private:
    int n_interior_;
    std::vector<double> knots_;
};

/// A basis evaluated on a grid with its least-squares projector.
struct BasisSystem {
    BsplineBasis basis;
    IndexGrid grid;
    MatrixXd b;         // K x L
    MatrixXd projector; // L x K, (B^T B)^-1 B^T

    /// Least-squares coefficients of each profile (rows of x): N x L.
    MatrixXd coefficients(const MatrixXd& x) const
    {
        if (x.cols() != grid.size())
            throw ShapeError("basis: profile length does not match grid");
        return x * projector.transpose();
    }
};

inline BasisSystem fit_basis(const IndexGrid& grid, int n_interior = 8)
{
    BsplineBasis basis(n_interior);
    if (grid.size() < basis.size())
        throw DataError("basis: grid has fewer points than basis functions");
    MatrixXd b = basis.matrix(grid);
    Eigen::ColPivHouseholderQR<MatrixXd> qr(b);
    if (qr.rank() < basis.size())
        throw NumericalError("basis: evaluation matrix is rank deficient on this grid");
    MatrixXd proj = qr.solve(MatrixXd::Identity(grid.size(), grid.size()));
    return {basis, grid, std::move(b), std::move(proj)};
}

} // namespace figp

#endif
