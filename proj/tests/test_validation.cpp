#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "figp/validation.hpp"
#include "test_util.hpp"

using namespace figp;

namespace {

PredictiveDist dist(VectorXd mean, MatrixXd cov) { return {std::move(mean), std::move(cov), 0.0}; }

} // namespace

TEST(Stats, PerfectPrediction)
{
    IndexGrid g = IndexGrid::uniform(6);
    Rng rng(1);
    MatrixXd x(5, 6);
    for (Index i = 0; i < 5; ++i)
        x.row(i) = testutil::random_profile(rng, g).transpose();
    VectorXd y = std_normal_vector(rng, 5);
    KernelSpec spec{FunctionalDistance{0.7, AlfParams::sde(0.4, 2.0)}, 1.0, 0.0};
    FittedGP gp(spec, GpData(x, y, g));
    ValidationStats s = stats_from_prediction(gp.predict(x, false), y);
    EXPECT_NEAR(s.rmse, 0.0, 1e-6);
    EXPECT_NEAR(s.r2, 1.0, 1e-10);
    EXPECT_LT(s.d2, 1e-3);
}

TEST(Stats, ScalarStandardNormalAtMean)
{
    ValidationStats s = stats_from_prediction(dist(VectorXd::Zero(1), MatrixXd::Identity(1, 1)), VectorXd::Zero(1));
    EXPECT_NEAR(s.ppld, -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
    EXPECT_EQ(s.d2, 0.0);
    EXPECT_EQ(s.coverage95, 1.0);
}

TEST(Stats, PpldMatchesDenseOracle)
{
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const Index n = 2 + rep % 6;
        MatrixXd a = MatrixXd::Random(n, n);
        MatrixXd cov = a * a.transpose() + 0.5 * MatrixXd::Identity(n, n);
        VectorXd mean = std_normal_vector(rng, n), y = std_normal_vector(rng, n);
        ValidationStats s = stats_from_prediction(dist(mean, cov), y);
        double ref = oracle::mvn_logpdf_dense(testutil::to_vec(y), testutil::to_vec(mean), testutil::to_mat(cov));
        EXPECT_NEAR(s.ppld, ref, 1e-8);
    }
}

TEST(Stats, FittedGpPpldMatchesOracle)
{
    Rng rng(3);
    auto inst = testutil::random_instance(rng, ModelKind::ADE, 12, 9);
    FittedGP gp(inst.layout.to_spec(inst.theta), inst.data);
    MatrixXd xs(4, 9);
    for (Index i = 0; i < 4; ++i)
        xs.row(i) = testutil::random_profile(rng, IndexGrid::uniform(9)).transpose();
    VectorXd ys = std_normal_vector(rng, 4);
    PredictiveDist p = gp.predict(xs);
    ValidationStats s = stats_at_theta(gp, xs, ys);
    EXPECT_NEAR(s.ppld, oracle::mvn_logpdf_dense(testutil::to_vec(ys), testutil::to_vec(p.mean), testutil::to_mat(p.cov)),
                1e-8);
}

TEST(Stats, CrpsRowAndR2Identity)
{
    Rng rng(4);
    MatrixXd a = MatrixXd::Random(5, 5);
    MatrixXd cov = a * a.transpose() + MatrixXd::Identity(5, 5);
    VectorXd mean = std_normal_vector(rng, 5), y = std_normal_vector(rng, 5);
    ValidationStats s = stats_from_prediction(dist(mean, cov), y);
    VectorXd e = y - mean;
    double d2 = e.dot(cov.ldlt().solve(e));
    EXPECT_NEAR(s.crps, -std::log(cov.determinant()) - d2, 1e-10);
    EXPECT_EQ(s.neg_crps(), -s.crps);
    double ss = (y.array() - y.mean()).square().sum();
    EXPECT_NEAR(s.r2, 1.0 - s.rmse * s.rmse * 5.0 / ss, 1e-12);
}

TEST(Stats, CoverageCountsHalfWidthOfSqrtVariance)
{
    VectorXd mean = VectorXd::Zero(4);
    MatrixXd cov = (VectorXd(4) << 4.0, 4.0, 0.25, 0.25).finished().asDiagonal();
    VectorXd y(4);
    y << 3.9, 4.0, 0.5, 0.9; // half-widths 3.92, 3.92, 0.98, 0.98
    EXPECT_DOUBLE_EQ(stats_from_prediction(dist(mean, cov), y).coverage95, 0.75);
}

TEST(Stats, EqualDeterminantsRankByPpldAndCrpsAlike)
{
    MatrixXd cov = MatrixXd::Identity(3, 3);
    VectorXd y = VectorXd::Zero(3);
    VectorXd m1(3), m2(3);
    m1 << 0.1, -0.2, 0.1;
    m2 << 0.5, 0.4, -0.3;
    auto s1 = stats_from_prediction(dist(m1, cov), y), s2 = stats_from_prediction(dist(m2, cov), y);
    EXPECT_LT(s1.neg_ppld(), s2.neg_ppld());
    EXPECT_LT(s1.neg_crps(), s2.neg_crps());
}

TEST(Stats, ShapeMismatch)
{
    EXPECT_THROW(stats_from_prediction(dist(VectorXd::Zero(2), MatrixXd::Identity(2, 2)), VectorXd::Zero(3)), ShapeError);
}

TEST(Thinning, SystematicStride)
{
    auto idx = thin_indices(1500, ThinConfig{});
    ASSERT_EQ(idx.size(), 100u);
    EXPECT_EQ(idx[0], 0);
    EXPECT_EQ(idx[1], 15);
    EXPECT_EQ(idx[99], 1485);
    ThinConfig all;
    all.m_tilde = 40;
    auto id = thin_indices(40, all);
    for (Index i = 0; i < 40; ++i)
        EXPECT_EQ(id[static_cast<std::size_t>(i)], i);
}

TEST(Thinning, BatchSpreadsDrawsEvenly)
{
    ThinConfig c;
    c.kind = ThinKind::Batch;
    c.seed = 3;
    auto idx = thin_indices(1500, c);
    ASSERT_EQ(idx.size(), 100u);
    for (Index b = 0; b < 10; ++b) {
        int count = 0;
        for (Index i : idx)
            count += (i / 150 == b) ? 1 : 0;
        EXPECT_EQ(count, 10);
    }
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
    EXPECT_EQ(idx, thin_indices(1500, c));
    c.m_tilde = 95;
    EXPECT_THROW(thin_indices(1500, c), ConfigError);
}

TEST(PosteriorStats, CollapsedPosteriorEqualsPointStats)
{
    Rng rng(5);
    auto inst = testutil::random_instance(rng, ModelKind::SDE, 15, 8);
    PosteriorSample ps;
    ps.layout = inst.layout;
    ps.draws = inst.theta.transpose().replicate(30, 1);
    MatrixXd xs = inst.data.inputs().topRows(6).array() + 0.1;
    VectorXd ys = std_normal_vector(rng, 6);
    ThinConfig c;
    c.m_tilde = 10;
    PosteriorValidation v = posterior_stats(ps, inst.data, xs, ys, c);
    ValidationStats s = stats_at_theta(FittedGP(inst.layout.to_spec(inst.theta), inst.data), xs, ys);
    EXPECT_NEAR(v.rmse, s.rmse, 1e-12);
    EXPECT_NEAR(v.neg_ppld, -s.ppld, 1e-10);
    EXPECT_NEAR(v.neg_mean_log_ppld, -s.ppld, 1e-10);
    EXPECT_NEAR(v.neg_crps, -s.crps, 1e-10);
    EXPECT_EQ(v.draws, 10);
}

TEST(PosteriorStats, AveragingIsLinearAcrossHalves)
{
    std::vector<ValidationStats> all;
    Rng rng(6);
    for (int i = 0; i < 8; ++i) {
        ValidationStats s;
        s.rmse = uniform01(rng);
        s.ppld = -10.0 * uniform01(rng);
        all.push_back(s);
    }
    std::vector<ValidationStats> a(all.begin(), all.begin() + 3), b(all.begin() + 3, all.end());
    double combined = average_stats(all).rmse;
    EXPECT_NEAR(combined, (3.0 * average_stats(a).rmse + 5.0 * average_stats(b).rmse) / 8.0, 1e-14);
    // log-mean-exp never exceeds the max and is at least the mean log density.
    PosteriorValidation v = average_stats(all);
    EXPECT_LE(v.neg_ppld, v.neg_mean_log_ppld);
}

TEST(PosteriorStats, EmptySampleIsConfigError)
{
    Rng rng(7);
    auto inst = testutil::random_instance(rng, ModelKind::SE, 5, 4);
    PosteriorSample ps;
    ps.layout = inst.layout;
    EXPECT_THROW(posterior_stats(ps, inst.data, inst.data.inputs(), inst.data.outputs(), ThinConfig{}), ConfigError);
}

TEST(Aggregate, Formulas)
{
    Aggregate a = aggregate({0.0, 2.0});
    EXPECT_DOUBLE_EQ(a.mean, 1.0);
    EXPECT_DOUBLE_EQ(a.se, 1.0);
    Aggregate b = aggregate({0.3, 0.3, 0.3});
    EXPECT_EQ(b.se, 0.0);
    EXPECT_TRUE(std::isnan(aggregate({1.0}).se));
    EXPECT_THROW(aggregate({}), ConfigError);
}
