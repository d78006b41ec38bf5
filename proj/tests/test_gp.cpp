#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "figp/gp.hpp"
#include "test_util.hpp"

using namespace figp;
using namespace testutil;

TEST(LogMarginal, StandardNormalAtZero)
{
    GpData d(MatrixXd::Zero(1, 2), VectorXd::Zero(1), IndexGrid::uniform(2));
    KernelSpec s{SeDistance{1.0}, 0.0, 1.0};
    EXPECT_NEAR(log_marginal(s, d), -0.5 * std::log(2.0 * std::numbers::pi), 1e-14);
}

TEST(LogMarginal, TwoPointHandCase)
{
    // Two scalar inputs at distance 1 apart under sigma_x = 1: S_y = [[1+n, e^-1/2],[e^-1/2, 1+n]].
    MatrixXd x(2, 1);
    x << 0.0, 1.0;
    VectorXd y(2);
    y << 0.3, -0.8;
    const double noise = 0.25;
    KernelSpec s{ArdDistance{VectorXd::Ones(1)}, 1.0, std::sqrt(noise)};
    const double a = 1.0 + noise, b = std::exp(-0.5);
    const double det = a * a - b * b;
    const double quad = (a * y(0) * y(0) - 2.0 * b * y(0) * y(1) + a * y(1) * y(1)) / det;
    const double expected = -0.5 * quad - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
    EXPECT_NEAR(log_marginal(s, GpData(x, y)), expected, 1e-12);
}

TEST(LogMarginal, MatchesDenseOracleOnRandomInstances)
{
    Rng rng(123);
    for (int rep = 0; rep < 50; ++rep) {
        auto kind = all_model_kinds[rep % 7];
        Index n = 1 + static_cast<Index>(rng() % 6);
        Instance inst = random_instance(rng, kind, n, 9);
        KernelSpec spec = inst.layout.to_spec(inst.theta);
        VectorXd w = feature_weights(spec, inst.data.grid(), inst.data.features());
        MatrixXd sy(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                double d = is_functional(kind)
                               ? d_omega(inst.data.inputs().row(i), inst.data.inputs().row(j), *inst.data.grid(),
                                         std::get<FunctionalDistance>(spec.distance).phi,
                                         std::get<FunctionalDistance>(spec.distance).alf)
                               : ((inst.data.inputs().row(i) - inst.data.inputs().row(j)).array().square() *
                                  w.transpose().array())
                                     .sum();
                sy(i, j) = spec.sigma_f * spec.sigma_f * std::exp(-0.5 * d) +
                           (i == j ? spec.sigma_eps * spec.sigma_eps : 0.0);
            }
        double ref = oracle::mvn_logpdf_dense(to_vec(inst.data.outputs()), oracle::Vec(n, 0.0), to_mat(sy));
        EXPECT_NEAR(log_marginal(spec, inst.data), ref, 1e-8) << model_name(kind) << " n=" << n;
    }
}

TEST(LogPosterior, FlatPriorEqualsLogMarginal)
{
    Rng rng(1);
    Instance inst = random_instance(rng, ModelKind::SDE, 5, 8);
    KernelSpec s = inst.layout.to_spec(inst.theta);
    EXPECT_NEAR(log_posterior(s, inst.data, PriorSet::flat(), inst.layout), log_marginal(s, inst.data), 1e-12);
}

TEST(LogPosterior, OutOfSupportIsMinusInfinityNotThrow)
{
    Rng rng(2);
    Instance inst = random_instance(rng, ModelKind::SDE, 4, 8);
    inst.theta(1) = 1.2;
    KernelSpec s = inst.layout.to_spec(inst.theta);
    EXPECT_EQ(log_posterior(s, inst.data, PriorSet{}, inst.layout), neg_inf);
    PosteriorDensity post(inst.layout, inst.data, PriorSet{});
    EXPECT_EQ(post.log_posterior(inst.theta), neg_inf);
}

TEST(LogPosterior, AdditiveDecomposition)
{
    Rng rng(3);
    for (auto kind : all_model_kinds) {
        Instance inst = random_instance(rng, kind, 5, 7);
        KernelSpec s = inst.layout.to_spec(inst.theta);
        double lp = log_posterior(s, inst.data, PriorSet{}, inst.layout);
        EXPECT_NEAR(lp - log_marginal(s, inst.data), log_density(PriorSet{}, inst.layout, inst.theta), 1e-10);
    }
}

TEST(PosteriorDensity, UnconstrainedAddsLogJacobian)
{
    Rng rng(4);
    for (auto kind : all_model_kinds) {
        Instance inst = random_instance(rng, kind, 6, 7);
        PosteriorDensity post(inst.layout, inst.data, PriorSet{});
        VectorXd u = inst.layout.unconstrain(inst.theta);
        EXPECT_NEAR(post(u), post.log_posterior(inst.theta) + inst.layout.log_jacobian(u), 1e-10);
        VectorXd g;
        EXPECT_NEAR(post.value_and_gradient(u, g), post(u), 1e-9);
    }
}

TEST(PosteriorDensity, GradientMatchesFiniteDifferences)
{
    Rng rng(5);
    for (int rep = 0; rep < 35; ++rep) {
        auto kind = all_model_kinds[rep % 7];
        Instance inst = random_instance(rng, kind, 6, 8);
        PosteriorDensity post(inst.layout, inst.data, PriorSet{});
        VectorXd u = inst.layout.unconstrain(inst.theta);
        VectorXd g;
        post.value_and_gradient(u, g);
        auto fd = oracle::fd_gradient([&](const oracle::Vec& v) { return post(Eigen::Map<const VectorXd>(v.data(), u.size())); },
                                      to_vec(u));
        for (Index i = 0; i < u.size(); ++i)
            EXPECT_NEAR(g(i), fd[static_cast<std::size_t>(i)], 1e-4 * std::max(1.0, std::abs(fd[static_cast<std::size_t>(i)])))
                << model_name(kind) << " slot " << inst.layout.names()[static_cast<std::size_t>(i)];
    }
}

TEST(PosteriorDensity, NoiseGradientFiniteNearZeroNoise)
{
    Rng rng(6);
    Instance inst = random_instance(rng, ModelKind::ARD, 6, 5);
    inst.theta(inst.layout.dim() - 1) = 1e-9;
    PosteriorDensity post(inst.layout, inst.data, PriorSet{});
    VectorXd g;
    double v = post.value_and_gradient(inst.layout.unconstrain(inst.theta), g);
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_TRUE(g.allFinite());
}

TEST(FittedGP, FactorAndAlphaInvariants)
{
    Rng rng(7);
    Instance inst = random_instance(rng, ModelKind::ADE, 12, 10);
    FittedGP fit(inst.layout.to_spec(inst.theta), inst.data);
    VectorXd w = fit.weights();
    MatrixXd sy = covariance(inst.data.squares().distances(w), fit.spec().sigma_f, fit.spec().sigma_eps, true);
    MatrixXd l = fit.cholesky().llt.matrixL();
    EXPECT_LE((l * l.transpose() - sy).norm() / sy.norm(), 1e-8);
    EXPECT_LE((sy * fit.alpha() - inst.data.outputs()).norm() / inst.data.outputs().norm(), 1e-8);
}

TEST(Predict, NoiselessInterpolationAtTrainingInputs)
{
    Rng rng(8);
    Instance inst = random_instance(rng, ModelKind::SDE, 8, 10);
    KernelSpec s = inst.layout.to_spec(inst.theta);
    s.sigma_eps = 0.0;
    FittedGP fit(s, inst.data);
    PredictiveDist p = fit.predict(inst.data.inputs());
    for (Index i = 0; i < 8; ++i) {
        EXPECT_NEAR(p.mean(i), inst.data.outputs()(i), 1e-6);
        EXPECT_LE(p.cov(i, i), 1e-6);
    }
}

TEST(Predict, RevertsToPriorFarAway)
{
    MatrixXd x(3, 1);
    x << 0.0, 0.5, 1.0;
    VectorXd y(3);
    y << 1.0, -1.0, 0.5;
    KernelSpec s{ArdDistance{VectorXd::Ones(1)}, 1.3, 0.2};
    FittedGP fit(s, GpData(x, y));
    MatrixXd far(1, 1);
    far << 1000.0; // distance 1e6
    PredictiveDist p = fit.predict(far);
    EXPECT_NEAR(p.mean(0), 0.0, 1e-12);
    EXPECT_NEAR(p.cov(0, 0), 1.3 * 1.3 + 0.2 * 0.2, 1e-12);
}

TEST(Predict, TwoByTwoHandSolve)
{
    MatrixXd x(2, 1), xs(1, 1);
    x << 0.0, 1.0;
    xs << 0.5;
    VectorXd y(2);
    y << 1.0, 2.0;
    const double sf = 1.0, se = 0.5;
    FittedGP fit(KernelSpec{ArdDistance{VectorXd::Ones(1)}, sf, se}, GpData(x, y));
    PredictiveDist p = fit.predict(xs);

    const double a = 1.0 + se * se, b = std::exp(-0.5);
    const double det = a * a - b * b;
    // inverse of [[a, b], [b, a]] is [[a, -b], [-b, a]] / det
    const double k = std::exp(-0.125); // both training points at distance 0.25
    const double alpha0 = (a * y(0) - b * y(1)) / det, alpha1 = (-b * y(0) + a * y(1)) / det;
    const double mean = k * (alpha0 + alpha1);
    const double quad = (k * k * (a - b) * 2.0) / det; // k^T S^-1 k with k = [k, k]
    EXPECT_NEAR(p.mean(0), mean, 1e-12);
    EXPECT_NEAR(p.cov(0, 0), 1.0 - quad + se * se, 1e-12);
    EXPECT_NEAR(fit.predict(xs, false).cov(0, 0), 1.0 - quad, 1e-12);
}

TEST(Predict, VarianceBoundedAndCovSymmetricPsd)
{
    Rng rng(9);
    Instance inst = random_instance(rng, ModelKind::ARD, 15, 6);
    KernelSpec s = inst.layout.to_spec(inst.theta);
    FittedGP fit(s, inst.data);
    PredictiveDist p = fit.predict(inst.data.inputs());
    EXPECT_TRUE(p.cov.isApprox(p.cov.transpose()));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(p.cov);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    for (Index i = 0; i < 15; ++i) {
        EXPECT_LE(p.cov(i, i), s.sigma_f * s.sigma_f + s.sigma_eps * s.sigma_eps + 1e-12);
        EXPECT_GE(p.cov(i, i), s.sigma_eps * s.sigma_eps - 1e-10);
    }
}

TEST(Predict, DuplicatedTrainingRowsAreInvariantWithoutNoise)
{
    Rng rng(10);
    Instance inst = random_instance(rng, ModelKind::SDE, 5, 8);
    KernelSpec s = inst.layout.to_spec(inst.theta);
    s.sigma_eps = 0.0;
    MatrixXd x2(6, 8);
    x2.topRows(5) = inst.data.inputs();
    x2.row(5) = inst.data.inputs().row(2);
    VectorXd y2(6);
    y2.head(5) = inst.data.outputs();
    y2(5) = inst.data.outputs()(2);
    FittedGP a(s, inst.data);
    FittedGP b(s, GpData(x2, y2, *inst.data.grid()));
    MatrixXd probe(3, 8);
    for (Index i = 0; i < 3; ++i)
        probe.row(i) = random_profile(rng, *inst.data.grid()).transpose();
    PredictiveDist pa = a.predict(probe), pb = b.predict(probe);
    EXPECT_LE((pa.mean - pb.mean).cwiseAbs().maxCoeff(), 1e-5);
    EXPECT_LE((pa.cov - pb.cov).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Predict, GridMismatchIsShapeError)
{
    Rng rng(11);
    Instance inst = random_instance(rng, ModelKind::SDE, 4, 8);
    FittedGP fit(inst.layout.to_spec(inst.theta), inst.data);
    Dataset other(MatrixXd::Zero(2, 8), IndexGrid(VectorXd::LinSpaced(8, 0.0, 0.9)), VectorXd::Zero(2));
    EXPECT_THROW(fit.predict(other), ShapeError);
    EXPECT_THROW(fit.predict(MatrixXd::Zero(2, 7)), ShapeError);
}

TEST(Cholesky, JitterLadderRescuesSingularMatrix)
{
    MatrixXd a = MatrixXd::Ones(4, 4); // rank one
    JitteredCholesky c = cholesky_with_jitter(a);
    EXPECT_GT(c.jitter, 0.0);
    EXPECT_LE(c.jitter, 1e-4);
    MatrixXd bad = -MatrixXd::Identity(3, 3);
    try {
        cholesky_with_jitter(bad);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_GT(std::abs(e.jitter()), 0.0);
    }
}
