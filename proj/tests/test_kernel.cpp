#include <cmath>

#include <gtest/gtest.h>

#include "figp/kernel.hpp"
#include "figp/random.hpp"
#include "oracle.hpp"

using namespace figp;

namespace {

VectorXd smooth_profile(Rng& rng, const IndexGrid& g)
{
    double a = std_normal(rng), b = std_normal(rng), c = std_normal(rng), f = 1.0 + 3.0 * uniform01(rng);
    VectorXd x(g.size());
    for (Index k = 0; k < g.size(); ++k)
        x(k) = a + b * std::sin(f * g[k]) + c * std::cos(2.0 * f * g[k] + 0.3);
    return x;
}

oracle::Vec to_vec(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

TEST(AlfWeight, PeakIsOneAtTau)
{
    for (double tau : {0.0, 0.2, 0.5, 1.0})
        EXPECT_DOUBLE_EQ(alf_weight(tau, AlfParams::ade(tau, 3.0, 2.0)), 1.0);
}

TEST(AlfWeight, SymmetricAtUnitKappa)
{
    AlfParams p = AlfParams::sde(0.5, 2.0);
    EXPECT_DOUBLE_EQ(alf_weight(0.25, p), std::exp(-0.5));
    EXPECT_DOUBLE_EQ(alf_weight(0.75, p), std::exp(-0.5));
}

TEST(AlfWeight, WaterVapourAsymmetricFit)
{
    AlfParams p = AlfParams::from_rates(0.38, 1.69, 15.70);
    EXPECT_NEAR(p.lambda1(), 1.69, 1e-12);
    EXPECT_NEAR(p.lambda2(), 15.70, 1e-12);
    EXPECT_NEAR(alf_weight(0.5, p), std::exp(-15.70 * 0.12), 1e-12);
}

TEST(AlfWeight, BoundedAndContinuous)
{
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        AlfParams p = AlfParams::ade(uniform01(rng), 0.1 + 20.0 * uniform01(rng), std::exp(std_normal(rng)));
        for (int i = 0; i <= 100; ++i) {
            double w = alf_weight(i / 100.0, p);
            EXPECT_GT(w, 0.0);
            EXPECT_LE(w, 1.0);
        }
        EXPECT_NEAR(alf_weight(p.tau + 1e-12, p), 1.0, 1e-9);
        EXPECT_NEAR(alf_weight(p.tau - 1e-12, p), 1.0, 1e-9);
    }
}

TEST(AlfWeight, EdnPeaksAtZero)
{
    AlfParams p = AlfParams::edn(4.0);
    EXPECT_DOUBLE_EQ(alf_weight(0.0, p), 1.0);
    for (int i = 1; i <= 10; ++i)
        EXPECT_LT(alf_weight(i / 10.0, p), alf_weight((i - 1) / 10.0, p));
}

TEST(AlfWeight, DerivativesMatchFiniteDifferences)
{
    Rng rng(5);
    const double h = 1e-6;
    for (int rep = 0; rep < 100; ++rep) {
        AlfParams p = AlfParams::ade(uniform01(rng), 0.5 + 10.0 * uniform01(rng), std::exp(0.5 * std_normal(rng)));
        double t = uniform01(rng);
        if (std::abs(t - p.tau) < 1e-3)
            continue;
        AlfWeightDerivs d = alf_weight_derivs(t, p);
        auto at = [&](double tau, double ll, double lk) {
            return alf_weight(t, AlfParams::ade(tau, std::exp(ll), std::exp(lk)));
        };
        double ll = std::log(p.lambda), lk = std::log(p.kappa);
        EXPECT_NEAR(d.d_tau, (at(p.tau + h, ll, lk) - at(p.tau - h, ll, lk)) / (2 * h), 1e-6);
        EXPECT_NEAR(d.d_log_lambda, (at(p.tau, ll + h, lk) - at(p.tau, ll - h, lk)) / (2 * h), 1e-6);
        EXPECT_NEAR(d.d_log_kappa, (at(p.tau, ll, lk + h) - at(p.tau, ll, lk - h)) / (2 * h), 1e-6);
    }
}

TEST(AlfWeight, KinkUsesLeftBranch)
{
    AlfParams p = AlfParams::from_rates(0.4, 2.0, 8.0);
    AlfWeightDerivs d = alf_weight_derivs(0.4, p);
    EXPECT_DOUBLE_EQ(d.value, 1.0);
    EXPECT_DOUBLE_EQ(d.d_tau, -2.0);
}

TEST(DOmega, IdenticalProfilesGiveZero)
{
    IndexGrid g = IndexGrid::uniform(7);
    VectorXd x = VectorXd::LinSpaced(7, -1.0, 2.0);
    EXPECT_EQ(d_omega(x, x, g, 0.3, AlfParams::sde(0.4, 3.0)), 0.0);
}

TEST(DOmega, ConstantIntegrandHandTrapezoid)
{
    IndexGrid g = IndexGrid::uniform(3);
    VectorXd xi = VectorXd::Ones(3), xj = VectorXd::Zero(3);
    EXPECT_NEAR(d_omega(xi, xj, g, 1.0, AlfParams::sde(0.5, 1e-12)), 1.0, 1e-11);
}

TEST(DOmega, TwoPointHandTrapezoid)
{
    IndexGrid g = IndexGrid::uniform(2);
    VectorXd xi(2), xj = VectorXd::Zero(2);
    xi << 0.0, 2.0;
    // tau = 0, kappa = 1, lambda = 1: omega = [1, e^-1]
    EXPECT_NEAR(d_omega(xi, xj, g, 1.0, AlfParams::sde(0.0, 1.0)), 2.0 * std::exp(-1.0), 1e-15);
}

TEST(DOmega, SymmetricNonNegativeAndScalesWithPhi)
{
    Rng rng(8);
    IndexGrid g = IndexGrid::uniform(25);
    for (int rep = 0; rep < 50; ++rep) {
        VectorXd a = smooth_profile(rng, g), b = smooth_profile(rng, g);
        AlfParams p = AlfParams::ade(uniform01(rng), 5.0 * uniform01(rng) + 0.1, std::exp(std_normal(rng)));
        double d1 = d_omega(a, b, g, 1.0, p);
        EXPECT_GE(d1, 0.0);
        EXPECT_DOUBLE_EQ(d1, d_omega(b, a, g, 1.0, p));
        EXPECT_NEAR(d_omega(a, b, g, 0.5, p), 4.0 * d1, 1e-12 * std::max(1.0, d1));
    }
}

TEST(DOmega, MonotoneInTheWeight)
{
    Rng rng(9);
    IndexGrid g = IndexGrid::uniform(30);
    for (int rep = 0; rep < 50; ++rep) {
        VectorXd a = smooth_profile(rng, g), b = smooth_profile(rng, g);
        double tau = uniform01(rng);
        // smaller rate => pointwise larger weight
        double lam = 0.5 + 10.0 * uniform01(rng);
        double hi = d_omega(a, b, g, 1.0, AlfParams::sde(tau, lam));
        double lo = d_omega(a, b, g, 1.0, AlfParams::sde(tau, 2.0 * lam));
        EXPECT_LE(lo, hi);
    }
}

TEST(DOmega, UnitWeightMatchesRiemannOracle)
{
    Rng rng(10);
    IndexGrid g = IndexGrid::uniform(2001);
    for (int rep = 0; rep < 5; ++rep) {
        VectorXd a = smooth_profile(rng, g), b = smooth_profile(rng, g);
        double trap = d_omega(a, b, g, 1.0, AlfParams::sde(0.5, 1e-14));
        double ref = oracle::riemann_norm(to_vec(g.values()), to_vec(a), to_vec(b), [](double) { return 1.0; });
        EXPECT_NEAR(trap, ref, 1e-6 * ref);
    }
}

TEST(DOmega, GridMismatchIsShapeError)
{
    IndexGrid g = IndexGrid::uniform(4);
    EXPECT_THROW(d_omega(VectorXd::Zero(3), VectorXd::Zero(3), g, 1.0, AlfParams::sde(0.5, 1.0)), ShapeError);
}

TEST(DArd, HandValuesAndHomogeneity)
{
    VectorXd xi(2), xj = VectorXd::Zero(2), s(2);
    xi << 1.0, 2.0;
    s << 1.0, 2.0;
    EXPECT_DOUBLE_EQ(d_ard(xi, xi, s), 0.0);
    EXPECT_DOUBLE_EQ(d_ard(xi, xj, s), 2.0);
    EXPECT_DOUBLE_EQ(d_ard(xi, xj, 3.0 * s), 2.0 / 9.0);
    EXPECT_THROW(d_ard(xi, VectorXd::Zero(3), s), ShapeError);
}

TEST(DArd, SeIsTheSharedScaleCase)
{
    Rng rng(2);
    VectorXd a = std_normal_vector(rng, 6), b = std_normal_vector(rng, 6);
    KernelSpec se{SeDistance{0.7}, 1.0, 0.1};
    VectorXd w = feature_weights(se, nullptr, 6);
    EXPECT_NEAR(((a - b).array().square() * w.array()).sum(), d_ard(a, b, VectorXd::Constant(6, 0.7)), 1e-13);
}

TEST(DPc, HandValues)
{
    VectorXd a(1), b(1), s(1);
    a << 3.0;
    b << 0.0;
    s << 1.0;
    EXPECT_DOUBLE_EQ(d_pc(a, a, s), 0.0);
    EXPECT_DOUBLE_EQ(d_pc(a, b, s), 9.0);
    VectorXd a2(2), b2 = VectorXd::Zero(2);
    a2 << 1.0, 1.0;
    EXPECT_DOUBLE_EQ(d_pc(a2, b2, VectorXd::Ones(2)), 2.0);
}

TEST(Covariance, HandValues)
{
    MatrixXd zero = MatrixXd::Zero(3, 3);
    EXPECT_TRUE(covariance(zero, 2.0, 0.0, false).isApprox(MatrixXd::Constant(3, 3, 4.0)));
    MatrixXd with_noise = covariance(zero, 2.0, 0.5, true);
    EXPECT_DOUBLE_EQ(with_noise(1, 1), 4.25);
    EXPECT_DOUBLE_EQ(with_noise(0, 1), 4.0);
    MatrixXd d(1, 1);
    d << 2.0;
    EXPECT_DOUBLE_EQ(covariance(d, 1.0, 0.0, false)(0, 0), std::exp(-1.0));
    EXPECT_THROW(covariance(MatrixXd::Zero(2, 3), 1.0, 1.0, true), ShapeError);
}

TEST(PairwiseSquares, MatchesDirectDistanceFunctions)
{
    Rng rng(4);
    IndexGrid g = IndexGrid::uniform(12);
    MatrixXd x(6, 12);
    for (Index i = 0; i < 6; ++i)
        x.row(i) = smooth_profile(rng, g).transpose();
    PairwiseSquares sq(x);

    KernelSpec fi{FunctionalDistance{0.4, AlfParams::ade(0.3, 4.0, 1.5)}, 1.0, 0.1};
    MatrixXd d = sq.distances(feature_weights(fi, &g, 12));
    const auto& fd = std::get<FunctionalDistance>(fi.distance);
    for (Index i = 0; i < 6; ++i) {
        EXPECT_EQ(d(i, i), 0.0);
        for (Index j = 0; j < 6; ++j)
            EXPECT_NEAR(d(i, j), d_omega(x.row(i), x.row(j), g, fd.phi, fd.alf), 1e-12);
    }

    VectorXd sig = (VectorXd::Random(12).array().abs() + 0.2).matrix();
    KernelSpec ard{ArdDistance{sig}, 1.0, 0.1};
    MatrixXd da = sq.distances(feature_weights(ard, nullptr, 12));
    MatrixXd dc = cross_distances(x, x, feature_weights(ard, nullptr, 12));
    for (Index i = 0; i < 6; ++i)
        for (Index j = 0; j < 6; ++j) {
            EXPECT_NEAR(da(i, j), d_ard(x.row(i), x.row(j), sig), 1e-12);
            EXPECT_NEAR(dc(i, j), da(i, j), 1e-12);
        }
}

TEST(KernelSpec, Validity)
{
    EXPECT_TRUE((KernelSpec{SeDistance{1.0}, 1.0, 0.0}.valid()));
    EXPECT_FALSE((KernelSpec{SeDistance{0.0}, 1.0, 0.1}.valid()));
    EXPECT_FALSE((KernelSpec{SeDistance{1.0}, 0.0, 0.0}.valid()));
    EXPECT_FALSE((KernelSpec{FunctionalDistance{1.0, AlfParams::sde(1.2, 1.0)}, 1.0, 0.1}.valid()));
    EXPECT_FALSE((KernelSpec{ArdDistance{VectorXd::Constant(3, -1.0)}, 1.0, 0.1}.valid()));
}

TEST(ModelKind, NamesRoundTrip)
{
    for (auto m : all_model_kinds) {
        EXPECT_EQ(parse_model(model_name(m)), m);
        EXPECT_EQ(parse_model(model_label(m)), m);
    }
    EXPECT_EQ(model_label(ModelKind::SDE), "fiGP-SDE");
    EXPECT_EQ(model_label(ModelKind::FFPCA), "viGP-FFPCA");
    EXPECT_THROW(parse_model("Matern"), ConfigError);
}
