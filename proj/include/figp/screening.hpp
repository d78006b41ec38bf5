#ifndef FIGP_SCREENING_HPP
#define FIGP_SCREENING_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "figp/data.hpp"
#include "figp/error.hpp"
#include "figp/gp.hpp"
#include "figp/random.hpp"
#include "figp/validation.hpp"

namespace figp {

/// Partition of [0, 1] into U intervals (b_{u-1}, b_u]; t = 0 belongs to the first.
class IndexPartition {
public:
    explicit IndexPartition(std::vector<double> bounds) : bounds_(std::move(bounds))
    {
        if (bounds_.size() < 2 || bounds_.front() != 0.0 || bounds_.back() != 1.0)
            throw ConfigError("partition: bounds must start at 0 and end at 1");
        for (std::size_t i = 1; i < bounds_.size(); ++i)
            if (!(bounds_[i] > bounds_[i - 1]))
                throw ConfigError("partition: bounds must be strictly increasing");
    }

    static IndexPartition equidistant(int u = 10)
    {
        if (u < 1)
            throw ConfigError("partition: need at least one interval");
        std::vector<double> b(static_cast<std::size_t>(u) + 1);
        for (int i = 0; i <= u; ++i)
            b[static_cast<std::size_t>(i)] = static_cast<double>(i) / u;
        return IndexPartition(std::move(b));
    }

    int size() const noexcept { return static_cast<int>(bounds_.size()) - 1; }
    double lower(int u) const { return bounds_.at(static_cast<std::size_t>(u) - 1); }
    double upper(int u) const { return bounds_.at(static_cast<std::size_t>(u)); }
    const std::vector<double>& bounds() const noexcept { return bounds_; }

    /// 1-based interval containing t. Points within 1e-12 of an upper bound
    /// count as on it, so 3 * 0.1 lands in (0.2, 0.3].
    int interval_of(double t) const
    {
        if (!(t >= 0.0 && t <= 1.0))
            throw DataError("partition: index outside [0, 1]");
        for (int u = 1; u <= size(); ++u)
            if (t <= upper(u) + 1e-12)
                return u;
        return size();
    }

    /// Grid positions that fall in interval u.
    std::vector<Index> members(const IndexGrid& grid, int u) const
    {
        if (u < 1 || u > size())
            throw ConfigError("partition: interval index out of range");
        std::vector<Index> out;
        for (Index k = 0; k < grid.size(); ++k)
            if (interval_of(grid[k]) == u)
                out.push_back(k);
        return out;
    }

private:
    std::vector<double> bounds_;
};

/// Uniform random permutation with no fixed points, by rejection.
inline std::vector<Index> random_derangement(Index n, Rng& rng)
{
    if (n < 2)
        throw DataError("derangement: need at least two rows");
    std::vector<Index> p(static_cast<std::size_t>(n));
    for (;;) {
        std::iota(p.begin(), p.end(), Index{0});
        for (Index i = n - 1; i > 0; --i) {
            auto j = static_cast<Index>(std::floor(uniform01(rng) * static_cast<double>(i + 1)));
            std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
        }
        bool fixed = false;
        for (Index i = 0; i < n && !fixed; ++i)
            fixed = p[static_cast<std::size_t>(i)] == i;
        if (!fixed)
            return p;
    }
}

/// Copy of x whose columns in `cols` are row-permuted by `perm` (row i takes row perm[i]).
inline MatrixXd permute_block(const MatrixXd& x, const std::vector<Index>& cols, const std::vector<Index>& perm)
{
    MatrixXd out = x;
    for (Index c : cols)
        for (Index i = 0; i < x.rows(); ++i)
            out(i, c) = x(perm[static_cast<std::size_t>(i)], c);
    return out;
}

/// Test inputs with the block of interval u replaced by a deranged copy.
inline MatrixXd corrupt(const MatrixXd& x, const IndexGrid& grid, const IndexPartition& part, int u, Rng& rng)
{
    if (x.cols() != grid.size())
        throw ShapeError("corrupt: profile length does not match grid");
    auto cols = part.members(grid, u);
    if (cols.empty())
        return x;
    return permute_block(x, cols, random_derangement(x.rows(), rng));
}

struct PfdiResult {
    IndexPartition partition = IndexPartition::equidistant(10);
    double base_rmse = 0.0;
    double base_neg_ppld = 0.0;
    VectorXd delta_rmse;     // per interval
    VectorXd delta_neg_ppld; // per interval
    VectorXd normalized_rmse;
    VectorXd normalized_neg_ppld;
    int n_perms = 1;

    int argmax_neg_ppld() const
    {
        Index k = 0;
        delta_neg_ppld.maxCoeff(&k);
        return static_cast<int>(k) + 1;
    }
    int argmax_rmse() const
    {
        Index k = 0;
        delta_rmse.maxCoeff(&k);
        return static_cast<int>(k) + 1;
    }
};

/// Deterioration profile scaled so that its maximum is 1; zero when no
/// interval deteriorates.
inline VectorXd normalize_profile(const VectorXd& delta)
{
    double m = delta.maxCoeff();
    return m > 0.0 ? VectorXd(delta / m) : VectorXd(VectorXd::Zero(delta.size()));
}

/// Permutation feature dynamic importance of a fitted vector-input model over
/// raw profiles: for each interval, the mean increase of RMSE and negPPLD on
/// test inputs with that block deranged.
inline PfdiResult pfdi(const FittedGP& gp, const MatrixXd& x_test, const VectorXd& y_test, const IndexGrid& grid,
                       const IndexPartition& part, int n_perms, std::uint64_t seed)
{
    if (n_perms < 1)
        throw ConfigError("pfdi: n_perms must be positive");
    if (!std::holds_alternative<ArdDistance>(gp.spec().distance) && !std::holds_alternative<SeDistance>(gp.spec().distance))
        throw ConfigError("pfdi: the fitted model must use a per-grid-point (ARD or SE) distance");
    PfdiResult r{part, 0.0, 0.0, {}, {}, {}, {}, n_perms};
    ValidationStats base = stats_at_theta(gp, x_test, y_test);
    r.base_rmse = base.rmse;
    r.base_neg_ppld = base.neg_ppld();
    const int nu = part.size();
    r.delta_rmse = VectorXd::Zero(nu);
    r.delta_neg_ppld = VectorXd::Zero(nu);
    for (int u = 1; u <= nu; ++u) {
        auto cols = part.members(grid, u);
        if (cols.empty())
            continue;
        Rng rng(stream_seed(seed, {static_cast<std::uint64_t>(u)}));
        double rm = 0.0, np = 0.0;
        for (int p = 0; p < n_perms; ++p) {
            MatrixXd xc = permute_block(x_test, cols, random_derangement(x_test.rows(), rng));
            ValidationStats s = stats_at_theta(gp, xc, y_test);
            rm += s.rmse;
            np += s.neg_ppld();
        }
        r.delta_rmse(u - 1) = rm / n_perms - r.base_rmse;
        r.delta_neg_ppld(u - 1) = np / n_perms - r.base_neg_ppld;
    }
    r.normalized_rmse = normalize_profile(r.delta_rmse);
    r.normalized_neg_ppld = normalize_profile(r.delta_neg_ppld);
    return r;
}

} // namespace figp

#endif
