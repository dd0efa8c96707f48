#include "doctest.h"

#include <cmath>

#include "stobas/committor.hpp"
#include "stobas/dynamics.hpp"
#include "stobas/sampling.hpp"
#include "support/oracles.hpp"

using namespace stobas;

TEST_CASE("time rule draws") {
    RngStream rng(3);
    auto fixed = TimeRule::fixed(7.5);
    CHECK(fixed.draw(rng) == 7.5);

    auto uni = TimeRule::uniform(4.0);
    for (int i = 0; i < 1000; ++i) {
        double t = uni.draw(rng);
        CHECK(t >= 0.0);
        CHECK(t < 4.0);
    }

    // empirical mean of exponential draws is 1/rate within 3 standard errors
    for (double rate : {0.25, 0.05}) {
        auto rule = TimeRule::exponential(rate);
        const int n = 100000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += rule.draw(rng);
        double mean = sum / n;
        double se = (1.0 / rate) / std::sqrt(static_cast<double>(n));
        CHECK(std::fabs(mean - 1.0 / rate) <= 3.0 * se);
    }

    CHECK_THROWS_AS(TimeRule::exponential(0.0), ValidationError);
    CHECK_THROWS_AS(TimeRule::uniform(-1.0), ValidationError);
}

TEST_CASE("region mini-language") {
    std::vector<std::string> labels;
    for (int i = 0; i < 3; ++i) labels.push_back("phi" + std::to_string(i));
    for (int i = 0; i < 3; ++i) labels.push_back("omega" + std::to_string(i));

    auto all_small = parse_region_spec("all-abs-lt:omega:0.5", 6, labels);
    CHECK(all_small.contains({9.0, 9.0, 9.0, 0.4, -0.45, 0.0}));
    CHECK(!all_small.contains({0.0, 0.0, 0.0, 0.6, 0.0, 0.0}));

    auto ball = parse_region_spec("ball:1.0:2.0:0.5", 2, {});
    CHECK(ball.contains({1.1, 2.2}));
    CHECK(!ball.contains({1.6, 2.0}));

    auto box = parse_region_spec("box:0:0:1:2", 2, {});
    CHECK(box.contains({0.5, 1.5}));
    CHECK(!box.contains({-0.1, 1.0}));
    CHECK(!box.contains({0.5, 2.0}));

    auto states = parse_region_spec("states:0,2", 3, {});
    CHECK(states.kind() == Region::Kind::boxes);
    auto member = region_membership(states);
    CHECK(member({0.0}));
    CHECK(!member({1.0}));
    CHECK(member({2.0}));

    CHECK_THROWS_AS(parse_region_spec("all-abs-lt:psi:0.5", 6, labels), ValidationError);
    CHECK_THROWS_AS(parse_region_spec("ball:1.0:0.5", 2, {}), ValidationError);
    CHECK_THROWS_AS(parse_region_spec("blob:1", 2, {}), ValidationError);
    CHECK_THROWS_AS(parse_region_spec("ball:x:y:0.5", 2, {}), ValidationError);
}

TEST_CASE("gbs on the whole space is certain") {
    auto chain = box_model_matrix(BoxModel::transient, 0.0001);
    DiscreteChainSystem sys{&chain};
    auto sampler = chain_state_sampler(ProbabilityVector::uniform(3));
    auto everything = [](const Vec&) { return true; };
    auto est = gbs_estimate(sys, sampler, everything, TimeRule::exponential(0.25), 500, 42);
    CHECK(est.b_hat == 1.0);
    CHECK(est.stderr_ == 0.0);
    CHECK(est.n_failed == 0);
}

TEST_CASE("stderr follows the binomial formula") {
    auto chain = box_model_matrix(BoxModel::metastable, 0.01);
    DiscreteChainSystem sys{&chain};
    auto sampler = chain_state_sampler(ProbabilityVector::uniform(2));
    auto member = region_membership(Region::boxes({0}));
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto est = gbs_estimate(sys, sampler, member, TimeRule::exponential(0.25), 400, seed);
        double expected = std::sqrt(est.b_hat * (1.0 - est.b_hat) / 400.0);
        CHECK(est.stderr_ == doctest::Approx(expected).epsilon(1e-15));
        CHECK(est.b_hat >= 0.0);
        CHECK(est.b_hat <= 1.0);
    }
}

TEST_CASE("estimates are deterministic in the seed and thread count") {
    auto chain = box_model_matrix(BoxModel::metastable, 0.01);
    DiscreteChainSystem sys{&chain};
    auto sampler = chain_state_sampler(ProbabilityVector::uniform(2));
    auto member = region_membership(Region::boxes({0}));
    auto rule = TimeRule::exponential(0.1);
    auto a = gbs_estimate(sys, sampler, member, rule, 2000, 7, 1);
    auto b = gbs_estimate(sys, sampler, member, rule, 2000, 7, 2);
    CHECK(a.b_hat == b.b_hat);
    auto c = gbs_estimate(sys, sampler, member, rule, 2000, 8, 1);
    // a different seed moves the estimate but stays within a few stderr
    CHECK(std::fabs(c.b_hat - a.b_hat) <= 5.0 * (a.stderr_ + c.stderr_));
}

TEST_CASE("sampled absorption stability matches the linear-algebra value") {
    auto rho = ProbabilityVector::uniform(3);
    auto chain = box_model_matrix(BoxModel::transient, 0.0001);
    DiscreteChainSystem sys{&chain};
    auto sampler = chain_state_sampler(rho);
    auto member = region_membership(Region::boxes({2}));
    for (double eps : {0.25, 0.05}) {
        auto est = gbs_estimate(sys, sampler, member, TimeRule::exponential(eps), 20000, 1234);
        double exact = eps_absorption_stability(chain, Region::boxes({2}), rho, eps);
        CHECK(std::fabs(est.b_hat - exact) <= 3.0 * est.stderr_);
    }
    // metastable model too
    auto meta = box_model_matrix(BoxModel::metastable, 0.01);
    DiscreteChainSystem msys{&meta};
    auto mrho = ProbabilityVector::uniform(2);
    auto msampler = chain_state_sampler(mrho);
    auto mmember = region_membership(Region::boxes({0}));
    for (double eps : {0.25, 0.05}) {
        auto est = gbs_estimate(msys, msampler, mmember, TimeRule::exponential(eps), 20000, 99);
        double exact = eps_absorption_stability(meta, Region::boxes({0}), mrho, eps);
        CHECK(std::fabs(est.b_hat - exact) <= 3.0 * est.stderr_);
    }
}

TEST_CASE("pointwise membership matches the committor on the leak chain") {
    auto leak = oracles::leak_chain(0.1);
    DiscreteChainSystem sys{&leak};
    auto member = region_membership(Region::boxes({0}));
    auto est = membership_estimate(sys, Vec{0.0}, member, TimeRule::exponential(0.1), 2000, 31);
    double exact = eps_committor(leak, Region::boxes({0}), 0.1).q[0];
    CHECK(std::fabs(est.b_hat - exact) <= 3.0 * est.stderr_);

    // a state already inside an invariant target region stays there
    auto inv = membership_estimate(sys, Vec{1.0}, region_membership(Region::boxes({1})),
                                   TimeRule::uniform(50.0), 200, 5);
    CHECK(inv.b_hat == 1.0);
}

TEST_CASE("gbs sweep covers the grid with derived seeds") {
    auto chain = box_model_matrix(BoxModel::metastable, 0.01);
    auto sampler = chain_state_sampler(ProbabilityVector::uniform(2));
    auto member = region_membership(Region::boxes({0}));
    std::vector<TimeRule> rules = {TimeRule::exponential(0.5), TimeRule::exponential(0.05)};
    std::vector<double> sigmas = {0.0};
    auto factory = [&](double) { return DiscreteChainSystem{&chain}; };
    auto cells = gbs_sweep(factory, sampler, member, rules, sigmas, 1000, 5);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].estimate.seed != cells[1].estimate.seed);
    CHECK(cells[0].rule.rate == 0.5);

    CHECK_THROWS_AS(gbs_sweep(factory, sampler, member, std::vector<TimeRule>{}, sigmas, 10, 1),
                    ValidationError);
}

TEST_CASE("failed integrations are excluded and counted") {
    struct ExplodingSystem {
        Vec integrate(Vec x0, double, RngStream&) const {
            if (x0[0] > 0.5) throw NonFiniteState("boom");
            return x0;
        }
    };
    ExplodingSystem sys;
    auto sampler = [](RngStream& rng) -> Vec { return {rng.uniform()}; };
    auto everything = [](const Vec&) { return true; };
    auto est = gbs_estimate(sys, sampler, everything, TimeRule::fixed(1.0), 1000, 77);
    CHECK(est.n_failed > 300);
    CHECK(est.n_failed < 700);
    CHECK(est.b_hat == 1.0); // failures do not dilute the estimate
}

TEST_CASE("limit-cycle starts never reach the fixed-point ball") {
    PendulumParams params;
    auto field = [params](const Vec& x, Vec& dx) { pendulum_field(params, x, dx); };
    auto sys = make_continuous_system(field, 2, 0.01);
    Vec fp = pendulum_fixed_point(params);
    auto in_ball = [fp](const Vec& x) {
        double d0 = x[0] - fp[0], d1 = x[1] - fp[1];
        return d0 * d0 + d1 * d1 < 0.25;
    };
    // deep in the rotating attractor's basin
    auto est = membership_estimate(sys, Vec{0.0, 12.0}, in_ball, TimeRule::fixed(200.0), 3, 9);
    CHECK(est.b_hat == 0.0);
}
