#ifndef FIGP_DATA_HPP
#define FIGP_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "figp/error.hpp"
#include "figp/random.hpp"

namespace figp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Ordered index locations t_1 < ... < t_K inside [0, 1], shared by every
/// profile of one input variable.
class IndexGrid {
public:
    IndexGrid() = default;

    explicit IndexGrid(VectorXd t) : t_(std::move(t))
    {
        if (t_.size() < 2)
            throw DataError("index grid needs at least 2 points");
        if (!t_.allFinite())
            throw DataError("index grid has non-finite values");
        if (t_(0) < 0.0 || t_(t_.size() - 1) > 1.0)
            throw DataError("index grid must lie in [0, 1]");
        for (Index k = 1; k < t_.size(); ++k)
            if (!(t_(k) > t_(k - 1)))
                throw DataError("index grid must be strictly increasing");
    }

    /// K equally spaced points from 0 to 1 inclusive.
    static IndexGrid uniform(Index k) { return IndexGrid(VectorXd::LinSpaced(k, 0.0, 1.0)); }

    Index size() const noexcept { return t_.size(); }
    double operator[](Index k) const { return t_(k); }
    const VectorXd& values() const noexcept { return t_; }

    /// Trapezoid-rule quadrature weights: sum_k c_k f(t_k) approximates the integral over [t_1, t_K].
    VectorXd trapezoid_weights() const
    {
        const Index k = size();
        VectorXd c = VectorXd::Zero(k);
        for (Index i = 1; i < k; ++i) {
            double h = 0.5 * (t_(i) - t_(i - 1));
            c(i - 1) += h;
            c(i) += h;
        }
        return c;
    }

    friend bool operator==(const IndexGrid& a, const IndexGrid& b)
    {
        return a.t_.size() == b.t_.size() && a.t_ == b.t_;
    }

private:
    VectorXd t_;
};

/// Affine scaling g(z) = (z - l) / (u - l).
struct ScalingBounds {
    double lower = 0.0;
    double upper = 1.0;

    void check() const
    {
        if (!(std::isfinite(lower) && std::isfinite(upper) && lower < upper))
            throw ConfigError("scaling bounds require finite l < u");
    }
};

/// One row of the per-variable scaling table: units, grid size and the
/// bounds for the input values (X) and the log-pressure index (t).
struct VariableScaling {
    std::string unit;
    Index grid_size = 0;
    ScalingBounds values;
    ScalingBounds index;
};

/// Default scaling table for the five atmospheric inputs.
inline std::map<std::string, VariableScaling> default_scaling_table()
{
    return {
        {"H2O", {"log ppm", 42, {-16.12, -5.16}, {-2.50, 2.67}}},
        {"HNO3", {"ppm", 16, {-7.20e-09, 1.83e-08}, {-2.50, 0.00}}},
        {"N2O", {"ppm", 18, {-4.00e-08, 6.22e-07}, {-2.00, 0.84}}},
        {"O3", {"ppm", 39, {-3.96e-06, 1.21e-05}, {-2.50, 1.67}}},
        {"Temp", {"log Kelvin", 43, {4.59, 5.73}, {-2.50, 3.00}}},
    };
}

/// Count of values that fall outside [0, 1] after normalization.
inline Index count_out_of_unit(const VectorXd& v)
{
    return (v.array() < 0.0 || v.array() > 1.0).count();
}

/// Apply g to each element. Values outside [l, u] are kept (not clipped).
inline VectorXd normalize(const VectorXd& z, const ScalingBounds& b)
{
    b.check();
    if (!z.allFinite())
        throw DataError("normalize: non-finite input value");
    return (z.array() - b.lower) / (b.upper - b.lower);
}

inline MatrixXd normalize(const MatrixXd& z, const ScalingBounds& b)
{
    b.check();
    if (!z.allFinite())
        throw DataError("normalize: non-finite input value");
    return (z.array() - b.lower) / (b.upper - b.lower);
}

inline VectorXd denormalize(const VectorXd& g, const ScalingBounds& b)
{
    b.check();
    return g.array() * (b.upper - b.lower) + b.lower;
}

/// Index grid from pressure levels in hPa: t = g(-log10 p).
inline IndexGrid index_from_pressure(const VectorXd& pressure_hpa, const ScalingBounds& b)
{
    if (!pressure_hpa.allFinite() || (pressure_hpa.array() <= 0.0).any())
        throw DataError("pressure levels must be finite and positive");
    VectorXd t = normalize(VectorXd(-pressure_hpa.array().log10()), b);
    for (Index k = 1; k < t.size(); ++k)
        if (!(t(k) > t(k - 1)))
            throw DataError("index from pressure is not strictly increasing; order levels by decreasing pressure");
    if (t.size() > 0 && (t(0) < -1e-12 || t(t.size() - 1) > 1.0 + 1e-12))
        throw DataError("pressure levels fall outside the index scaling bounds");
    t = t.cwiseMax(0.0).cwiseMin(1.0);
    return IndexGrid(std::move(t));
}

/// Functional-input data set for one input variable: N profiles observed on a
/// shared grid plus N scalar outputs. Immutable after construction.
class Dataset {
public:
    Dataset() = default;

    Dataset(MatrixXd inputs, IndexGrid grid, VectorXd outputs)
        : inputs_(std::move(inputs)), grid_(std::move(grid)), outputs_(std::move(outputs))
    {
        if (inputs_.rows() != outputs_.size())
            throw ShapeError("dataset: " + std::to_string(inputs_.rows()) + " profiles but " +
                             std::to_string(outputs_.size()) + " outputs");
        if (inputs_.cols() != grid_.size())
            throw ShapeError("dataset: profile length " + std::to_string(inputs_.cols()) +
                             " does not match grid size " + std::to_string(grid_.size()));
        if (!inputs_.allFinite() || !outputs_.allFinite())
            throw DataError("dataset contains non-finite values");
    }

    Index size() const noexcept { return outputs_.size(); }
    Index grid_size() const noexcept { return grid_.size(); }
    const MatrixXd& inputs() const noexcept { return inputs_; }
    const IndexGrid& grid() const noexcept { return grid_; }
    const VectorXd& outputs() const noexcept { return outputs_; }

    Dataset subset(std::span<const Index> rows) const
    {
        MatrixXd x(static_cast<Index>(rows.size()), inputs_.cols());
        VectorXd y(static_cast<Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            x.row(static_cast<Index>(i)) = inputs_.row(rows[i]);
            y(static_cast<Index>(i)) = outputs_(rows[i]);
        }
        return {std::move(x), grid_, std::move(y)};
    }

    /// Same outputs and grid, different profiles (used to corrupt test inputs).
    Dataset with_inputs(MatrixXd x) const { return {std::move(x), grid_, outputs_}; }

private:
    MatrixXd inputs_;
    IndexGrid grid_;
    VectorXd outputs_;
};

/// One training/test pair of complementary subsets.
struct SubsetPair {
    int id = 1;
    std::vector<Index> train_rows;
    std::vector<Index> test_rows;
    Dataset train;
    Dataset test;
};

/// Row indices of the H (train, test) pairs. Each pair takes n_per rows for
/// training and n_per for testing from one seeded shuffle; all pairs are
/// pairwise disjoint.
inline std::vector<std::pair<std::vector<Index>, std::vector<Index>>>
partition_indices(Index n_source, int h, Index n_per, std::uint64_t seed)
{
    if (h < 1 || n_per < 1)
        throw ConfigError("partition: H and n_per must be positive");
    if (2 * static_cast<Index>(h) * n_per > n_source)
        throw ConfigError("partition: 2*H*n_per = " + std::to_string(2 * h * n_per) + " exceeds " +
                          std::to_string(n_source) + " available rows");
    std::vector<Index> perm(static_cast<std::size_t>(n_source));
    std::iota(perm.begin(), perm.end(), Index{0});
    Rng rng(seed);
    // Fisher-Yates with an explicit draw so the order does not depend on the
    // standard library's shuffle implementation.
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    std::vector<std::pair<std::vector<Index>, std::vector<Index>>> out;
    std::size_t pos = 0;
    for (int s = 0; s < h; ++s) {
        std::vector<Index> train(perm.begin() + pos, perm.begin() + pos + n_per);
        pos += n_per;
        std::vector<Index> test(perm.begin() + pos, perm.begin() + pos + n_per);
        pos += n_per;
        out.emplace_back(std::move(train), std::move(test));
    }
    return out;
}

inline std::vector<SubsetPair> partition(const Dataset& source, int h, Index n_per, std::uint64_t seed)
{
    auto idx = partition_indices(source.size(), h, n_per, seed);
    std::vector<SubsetPair> out;
    for (int s = 0; s < h; ++s) {
        SubsetPair p;
        p.id = s + 1;
        p.train_rows = std::move(idx[s].first);
        p.test_rows = std::move(idx[s].second);
        p.train = source.subset(p.train_rows);
        p.test = source.subset(p.test_rows);
        out.push_back(std::move(p));
    }
    return out;
}

} // namespace figp

#endif
