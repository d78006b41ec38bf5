#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "figp/inference.hpp"
#include "figp/simulate.hpp"
#include "test_util.hpp"

using namespace figp;

namespace {

PosteriorDensity small_problem(ModelKind kind, std::uint64_t seed = 1, Index n = 40, Index k = 12)
{
    SyntheticSpec spec;
    spec.n = n;
    spec.grid = IndexGrid::uniform(k);
    spec.kernel = KernelSpec{FunctionalDistance{0.5, AlfParams::sde(0.3, 7.6)}, 1.0, 0.1};
    Dataset d = simulate(spec, seed);
    return {ParamLayout(kind, k), GpData::from_profiles(d), PriorSet::defaults()};
}

} // namespace

TEST(RandomSearch, SingletonAndOrdering)
{
    auto post = small_problem(ModelKind::SDE);
    EXPECT_EQ(random_search(post, 1, 3).size(), 1u);
    auto c = random_search(post, 200, 3);
    ASSERT_EQ(c.size(), 200u);
    for (std::size_t i = 1; i < c.size(); ++i)
        EXPECT_GE(c[i - 1].log_post, c[i].log_post);
    EXPECT_GE(c.front().log_post, c[c.size() / 2].log_post);
    for (const auto& x : c)
        EXPECT_TRUE(post.layout().in_support(x.theta));
}

TEST(RandomSearch, DeterministicUnderSeed)
{
    auto post = small_problem(ModelKind::ADE);
    auto a = random_search(post, 50, 9), b = random_search(post, 50, 9);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].theta, b[i].theta);
}

TEST(Multistart, NeverBelowAnyStartingValue)
{
    for (ModelKind kind : {ModelKind::SE, ModelKind::ARD, ModelKind::Edn, ModelKind::SDE, ModelKind::ADE}) {
        auto post = small_problem(kind, 2);
        auto c = random_search(post, 100, 4);
        MapEstimate m = multistart_optimize(post, c, 5);
        for (int s = 0; s < 5; ++s)
            EXPECT_GE(m.log_post, c[static_cast<std::size_t>(s)].log_post) << model_name(kind);
        EXPECT_EQ(m.starts, 5);
        EXPECT_NEAR(post.log_posterior(m.theta), m.log_post, 1e-9);
    }
}

TEST(Multistart, StationaryCandidateIsReturnedUnchanged)
{
    auto post = small_problem(ModelKind::SDE, 3);
    auto c = random_search(post, 50, 5);
    MapEstimate first = multistart_optimize(post, c, 3);
    std::vector<Candidate> at_map{{first.theta, first.log_post}};
    LbfgsOptions tight;
    tight.grad_tol = 1e-3;
    MapEstimate again = multistart_optimize(post, at_map, 1, tight);
    EXPECT_EQ(again.theta, first.theta);
    EXPECT_EQ(again.log_post, first.log_post);
}

TEST(Multistart, RecoversChangePointOfSyntheticAlf)
{
    SyntheticSpec spec;
    spec.n = 200;
    spec.grid = IndexGrid::uniform(30);
    spec.kernel = KernelSpec{FunctionalDistance{0.5, AlfParams::sde(0.3, 7.6)}, 1.0, 0.1};
    Dataset d = simulate(spec, 21);
    PosteriorDensity post(ParamLayout(ModelKind::SDE, 30), GpData::from_profiles(d), PriorSet::defaults());
    MapEstimate m = multistart_optimize(post, random_search(post, 300, 22), 5);
    EXPECT_NEAR(m.theta(post.layout().index_of(ParamRole::Tau)), 0.3, 0.1);
}

TEST(Multistart, EmptyCandidatesIsConfigError)
{
    auto post = small_problem(ModelKind::SE);
    EXPECT_THROW(multistart_optimize(post, {}, 3), ConfigError);
}

TEST(Sample, ShapesSupportAndDeterminism)
{
    auto post = small_problem(ModelKind::SDE, 4);
    auto m = multistart_optimize(post, random_search(post, 50, 1), 2);
    McmcConfig cfg;
    cfg.warmup = 100;
    cfg.draws = 60;
    PosteriorSample a = sample(post, m.theta, cfg, 77);
    PosteriorSample b = sample(post, m.theta, cfg, 77);
    ASSERT_EQ(a.draws.rows(), 60);
    ASSERT_EQ(a.draws.cols(), post.dim());
    EXPECT_EQ(a.log_posts.size(), 60);
    EXPECT_EQ(a.draws, b.draws);
    for (Index i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(post.layout().in_support(a.theta(i)));
        EXPECT_NEAR(a.log_posts(i), post.log_posterior(a.theta(i)), 1e-8);
    }
}

TEST(Sample, OffSupportInitIsConfigError)
{
    auto post = small_problem(ModelKind::SDE);
    VectorXd bad = VectorXd::Constant(post.dim(), 0.5);
    bad(1) = 1.5; // tau
    EXPECT_THROW(sample(post, bad, McmcConfig{}, 1), ConfigError);
}

TEST(Fit, DiagnosticsMonitorEveryWeight)
{
    auto post = small_problem(ModelKind::SDE, 6);
    McmcConfig cfg;
    cfg.n_random = 100;
    cfg.n_opts = 3;
    cfg.warmup = 200;
    cfg.draws = 200;
    FitResult r = fit(post, cfg, 5);
    ASSERT_EQ(r.diagnostics.quantities.size(), 12u);
    EXPECT_EQ(r.diagnostics.quantities[0].name, "omega[1]");
    EXPECT_EQ(r.top.size(), 3u);
    EXPECT_EQ(r.posterior.size(), 200);
    for (const auto& q : r.diagnostics.quantities)
        EXPECT_TRUE(std::isfinite(q.geweke_z));
}

TEST(Monitored, NamesFollowModelFamily)
{
    EXPECT_EQ(monitored_names(ParamLayout(ModelKind::SE, 5), 1), std::vector<std::string>{"inv_sq_sigma"});
    auto ard = monitored_names(ParamLayout(ModelKind::ARD, 3), 3);
    EXPECT_EQ(ard.back(), "inv_sq_sigma[3]");
}

TEST(McmcConfig, Validation)
{
    McmcConfig c;
    c.n_opts = 0;
    EXPECT_THROW(c.check(), ConfigError);
    c = McmcConfig{};
    c.target_accept = 0.0;
    EXPECT_THROW(c.check(), ConfigError);
}
