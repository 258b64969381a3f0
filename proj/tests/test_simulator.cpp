#include <catch2/catch_amalgamated.hpp>

#include <collabopt/simulator.hpp>

#include <cmath>
#include <numeric>

using namespace collabopt;
using Catch::Approx;

namespace {

RunConfig two_agent(Aggregator agg, double sigma = 10.0, double alpha = 0.5) {
    RunConfig c;
    c.main = QuadraticTask{{1.0}, {0.0}, sigma, 0.0};
    c.collaborators = {QuadraticTask{{2.0}, {2.0}, sigma, 0.0}};
    c.aggregator = agg;
    c.weights = CollaborationWeights{alpha, {1.0}, 0.01};
    c.step = StepSize::constant(1e-2);
    c.horizon = 500;
    c.x0 = {3.0};
    c.seed = 4;
    return c;
}

std::vector<std::uint64_t> seed_range(std::uint64_t n) {
    std::vector<std::uint64_t> s(n);
    std::iota(s.begin(), s.end(), 0);
    return s;
}

}  // namespace

TEST_CASE("noiseless unit step lands on the optimum", "[simulator]") {
    RunConfig c;
    c.main = QuadraticTask{{1.0}, {0.0}, 0.0, 0.0};
    c.step = StepSize::constant(1.0);
    c.horizon = 3;
    c.x0 = {5.0};
    auto tr = run(c);
    REQUIRE(tr.test_loss.size() == 4u);
    CHECK(tr.test_loss[0] == 12.5);
    CHECK(tr.test_loss[1] == 0.0);
    CHECK(tr.test_loss[3] == 0.0);
    CHECK(tr.final_iterate == Vec{0.0});
    CHECK(tr.grad_norm_sq[0] == 25.0);
    CHECK_FALSE(tr.diverged);
}

TEST_CASE("default initial iterate", "[simulator]") {
    RunConfig c;
    c.main = QuadraticTask{{1.0, 2.0}, {0.0, 0.0}, 0.0, 0.0};
    CHECK(c.initial_iterate() == Vec{10.0, 10.0});
}

TEST_CASE("runs are bit-reproducible", "[simulator]") {
    for (auto agg : {Aggregator::Alone, Aggregator::WGA, Aggregator::BC, Aggregator::OracleBC}) {
        auto c = two_agent(agg);
        c.oracle_v = 0.5;
        auto a = run(c), b = run(c);
        REQUIRE(a.test_loss == b.test_loss);
        REQUIRE(a.grad_norm_sq == b.grad_norm_sq);
        c.seed = 5;
        REQUIRE(run(c).test_loss != a.test_loss);
    }
}

TEST_CASE("alpha 0 reproduces Alone bit for bit", "[simulator][property]") {
    auto alone = run(two_agent(Aggregator::Alone, 10.0, 0.0));
    for (auto agg : {Aggregator::WGA, Aggregator::BC, Aggregator::OracleBC}) {
        auto c = two_agent(agg, 10.0, 0.0);
        c.oracle_v = 2.0;
        auto tr = run(c);
        REQUIRE(tr.test_loss == alone.test_loss);
        REQUIRE(tr.final_iterate == alone.final_iterate);
    }
}

TEST_CASE("replication is independent of thread count", "[simulator][property]") {
    auto c = two_agent(Aggregator::BC);
    auto seeds = seed_range(9);
    auto r1 = run_replicated(c, seeds, {1, false});
    auto r4 = run_replicated(c, seeds, {4, false});
    CHECK(r1.mean_test_loss == r4.mean_test_loss);
    CHECK(r1.plateau_loss.mean == r4.plateau_loss.mean);
    CHECK(r1.plateau_loss.se == r4.plateau_loss.se);
    CHECK(r1.per_seed_plateau == r4.per_seed_plateau);
}

TEST_CASE("run_replicated statistics", "[simulator]") {
    SECTION("one seed has no standard error") {
        std::vector<std::uint64_t> one{3};
        auto r = run_replicated(two_agent(Aggregator::WGA), one);
        CHECK_FALSE(r.final_gap.se.has_value());
        CHECK(r.final_gap.n == 1u);
        CHECK(r.final_gap.mean == run([] { auto c = two_agent(Aggregator::WGA); c.seed = 3; return c; }()).final_gap());
    }
    SECTION("noise gives a positive standard error") {
        auto r = run_replicated(two_agent(Aggregator::WGA), seed_range(20));
        REQUIRE(r.final_gap.se.has_value());
        CHECK(*r.final_gap.se > 0.0);
    }
    SECTION("no noise means identical seeds") {
        auto r = run_replicated(two_agent(Aggregator::WGA, 0.0), seed_range(20), {0, true});
        REQUIRE(r.final_gap.se.has_value());
        CHECK(*r.final_gap.se == 0.0);
        for (const auto& t : r.traces) REQUIRE(t.test_loss == r.traces[0].test_loss);
    }
}

TEST_CASE("plateau and averages follow their definitions", "[simulator]") {
    auto c = two_agent(Aggregator::WGA);
    c.horizon = 95;
    auto tr = run(c);
    auto w = plateau_window(95);
    CHECK(w == 9);
    double s = 0;
    for (std::int64_t t = 95 - w + 1; t <= 95; ++t) s += tr.test_loss[t];
    CHECK(tr.plateau_loss() == Approx(s / w));
    double g = 0;
    for (int t = 0; t < 95; ++t) g += tr.grad_norm_sq[t];
    CHECK(tr.avg_grad_norm_sq() == Approx(g / 95));
    CHECK(tr.final_gap() == tr.test_loss[95]);
    CHECK(plateau_window(5) == 1);
}

TEST_CASE("divergence truncates and is excluded", "[simulator]") {
    auto c = two_agent(Aggregator::Alone, 1.0);
    c.step = StepSize::constant(3.0);
    c.horizon = 1000;
    auto tr = run(c);
    CHECK(tr.diverged);
    CHECK(tr.test_loss.size() < 1001u);
    CHECK(tr.test_loss.size() == static_cast<std::size_t>(tr.steps_completed + 1));
    auto r = run_replicated(c, seed_range(3));
    CHECK(r.diverged_seeds.size() == 3u);
    CHECK(r.plateau_loss.n == 0u);
}

TEST_CASE("configuration errors surface before step 0", "[simulator]") {
    auto c = two_agent(Aggregator::WGA, 1.0, 0.99);
    c.collaborators[0].curvature = {4.0};  // m = 9: alpha must stay below 1/3
    CHECK_THROWS_AS(run(c), std::invalid_argument);
    auto d = two_agent(Aggregator::WGA);
    d.x0 = {1.0, 2.0};
    CHECK_THROWS_AS(run(d), std::invalid_argument);
    auto e = two_agent(Aggregator::WGA);
    e.horizon = 0;
    CHECK_THROWS_AS(run(e), std::invalid_argument);
    auto f = two_agent(Aggregator::BC);
    f.weights.beta = 0.0;
    CHECK_THROWS_AS(run(f), std::invalid_argument);
    auto g = two_agent(Aggregator::WGA);
    g.weights.tau = {0.5};
    CHECK_THROWS_AS(run(g), std::invalid_argument);
}

TEST_CASE("mean dynamics oracle", "[simulator]") {
    SECTION("alpha 0 is a linear contraction") {
        auto c = two_agent(Aggregator::Alone);
        auto m = mean_dynamics_oracle(c, 50);
        REQUIRE(m.size() == 51u);
        for (int t = 0; t <= 50; ++t) REQUIRE(m[t][0] == Approx(3.0 * std::pow(1 - 1e-2, t)));
    }
    SECTION("fixed point is the curvature-weighted optimum") {
        auto c = two_agent(Aggregator::WGA, 0.0, 0.3);
        double fp = (0.7 * 1 * 0 + 0.3 * 2 * 2) / (0.7 * 1 + 0.3 * 2);
        CHECK(wga_fixed_point(c)[0] == Approx(fp));
        auto m = mean_dynamics_oracle(c, 5000);
        CHECK(m.back()[0] == Approx(fp).margin(1e-12));
    }
    SECTION("BC is unsupported") {
        CHECK_THROWS_AS(mean_dynamics_oracle(two_agent(Aggregator::BC), 10), std::invalid_argument);
    }
    SECTION("seed-averaged iterates match the oracle within 3 SE") {
        auto c = two_agent(Aggregator::WGA, 2.0, 0.4);
        c.horizon = 1000;
        c.snapshot_stride = 100;
        auto seeds = seed_range(400);
        auto r = run_replicated(c, seeds, {0, true});
        auto m = mean_dynamics_oracle(c, c.horizon);
        for (std::size_t s = 0; s < r.traces[0].snapshot_steps.size(); ++s) {
            auto t = r.traces[0].snapshot_steps[s];
            double s1 = 0, s2 = 0;
            for (const auto& tr : r.traces) {
                double v = tr.snapshots[s][0];
                s1 += v;
                s2 += v * v;
            }
            double n = double(r.traces.size()), mean = s1 / n;
            double se = std::sqrt((s2 / n - mean * mean) / (n - 1));
            REQUIRE(std::abs(mean - m[t][0]) <= 3 * se + 1e-12);
        }
    }
}

TEST_CASE("noiseless WGA settles at the biased fixed point", "[simulator][property]") {
    for (double alpha : {0.1, 0.5, 0.9}) {
        auto c = two_agent(Aggregator::WGA, 0.0, alpha);
        c.step = StepSize::constant(0.1);
        c.horizon = 3000;
        auto tr = run(c);
        double dist = alpha * 2 * 2 / ((1 - alpha) * 1 + alpha * 2);
        REQUIRE(std::abs(tr.final_iterate[0]) == Approx(dist).margin(1e-9));
    }
}

TEST_CASE("noiseless BC removes translation bias", "[simulator][property]") {
    for (double zeta : {0.5, 4.0, 30.0}) {
        RunConfig c;
        c.main = QuadraticTask{{1.5}, {1.0}, 0.0, 0.0};
        c.collaborators = {QuadraticTask{{1.5}, {1.0 + zeta / 1.5}, 0.0, 0.0}};
        c.aggregator = Aggregator::BC;
        c.weights = CollaborationWeights{0.9, {1.0}, 0.05};
        c.step = StepSize::constant(0.1);
        c.horizon = 3000;
        c.x0 = {-4.0};
        auto tr = run(c);
        REQUIRE(tr.final_gap() < 1e-20);
    }
}

TEST_CASE("more noise never lowers the mean plateau", "[simulator][property]") {
    // antithetic pairs cancel the term linear in the noise, so only the
    // quadratic part (which scales with sigma^2) separates the two levels
    auto paired = [](RunConfig c) {
        auto seeds = seed_range(10);
        auto a = run_replicated(c, seeds);
        c.antithetic = true;
        auto b = run_replicated(c, seeds);
        return std::pair{a.plateau_loss.mean + b.plateau_loss.mean, a.final_gap.mean + b.final_gap.mean};
    };
    for (auto agg : {Aggregator::Alone, Aggregator::WGA, Aggregator::BC}) {
        auto c = two_agent(agg, 1.0, 0.5);
        c.horizon = 2000;
        auto lo = paired(c);
        c.main.noise_std *= 2;
        c.collaborators[0].noise_std *= 2;
        auto hi = paired(c);
        REQUIRE(hi.first > lo.first);
        REQUIRE(hi.second > lo.second);
    }
}

TEST_CASE("antithetic runs mirror the noise", "[simulator]") {
    auto c = two_agent(Aggregator::Alone, 3.0);
    c.x0 = {0.0};
    auto a = run(c);
    c.antithetic = true;
    auto b = run(c);
    CHECK(b.final_iterate[0] == -a.final_iterate[0]);
    CHECK(b.test_loss == a.test_loss);
}

TEST_CASE("bias-estimate initialisation", "[simulator]") {
    SECTION("first bias makes step 0 a local step") {
        auto bc = two_agent(Aggregator::BC, 5.0, 0.8);
        bc.horizon = 1;
        auto al = bc;
        al.aggregator = Aggregator::Alone;
        CHECK(run(bc).final_iterate[0] == Approx(run(al).final_iterate[0]).epsilon(1e-15));
    }
    SECTION("zero policy") {
        auto bc = two_agent(Aggregator::BC);
        bc.c0 = C0Policy{C0Kind::Zero, 1};
        CHECK(initial_bias_estimate(bc) == Vec{0.0});
    }
    SECTION("warm start divides the initial error by S") {
        auto bc = two_agent(Aggregator::BC, 2.0);
        double truth = 2.0 * (3.0 - 2.0) - 3.0;  // grad f_1 - grad f_0 at x0 = 3
        double s0 = 4.0 + 4.0;
        for (int S : {1, 8}) {
            bc.c0 = C0Policy{S == 1 ? C0Kind::FirstBias : C0Kind::WarmStart, S};
            double e = 0;
            const int n = 20000;
            for (int i = 0; i < n; ++i) {
                bc.seed = static_cast<std::uint64_t>(i);
                double d = initial_bias_estimate(bc)[0] - truth;
                e += d * d;
            }
            REQUIRE(e / n == Approx(s0 / S).epsilon(0.05));
        }
    }
}

TEST_CASE("decreasing step schedule inside runs", "[simulator]") {
    ScheduleInputs in;
    in.sim.smoothness = 1.0;
    in.sim.pl_constant = 1.0;
    auto s = StepSize::decreasing_pl(in, 2);
    CHECK(s.at(0) == Approx(1.0));
    CHECK(s.at(9) == Approx(0.19));
    RunConfig c;
    c.main = QuadraticTask{{1.0}, {0.0}, 0.0, 0.0};
    c.step = s;
    c.horizon = 5;
    c.x0 = {4.0};
    auto tr = run(c);
    CHECK(tr.final_iterate[0] == 0.0);
}

TEST_CASE("sweep axes", "[simulator]") {
    auto base = two_agent(Aggregator::WGA, 1.0, 0.5);
    base.horizon = 200;
    SECTION("zeta 0 puts the collaborator optimum on the main one") {
        auto c = apply_axis(base, SweepAxis::Zeta, 0.0);
        CHECK(c.collaborators[0].optimum == base.main.optimum);
        auto c4 = apply_axis(base, SweepAxis::Zeta, 4.0);
        CHECK(c4.collaborators[0].optimum[0] == Approx(2.0));
        auto s = similarity_params(c4.main, c4.collaborators, c4.weights.tau);
        CHECK(s.grad_offset_sq == Approx(16.0));
    }
    SECTION("alpha 0 reproduces Alone") {
        std::vector<double> vals{0.0};
        auto seeds = seed_range(3);
        auto pts = sweep(base, SweepAxis::Alpha, vals, seeds);
        auto al = base;
        al.aggregator = Aggregator::Alone;
        auto r = run_replicated(al, seeds);
        CHECK(pts[0].result.mean_test_loss == r.mean_test_loss);
    }
    SECTION("N rescales the averaged collaborator") {
        auto c = apply_axis(base, SweepAxis::N, 100.0, true);
        CHECK(c.collaborators[0].noise_std == Approx(0.1));
        CHECK(c.weights.alpha == Approx(100.0 / 101.0));
        auto d = apply_axis(base, SweepAxis::N, 100.0, false);
        CHECK(d.weights.alpha == 0.5);
    }
    SECTION("delta keeps zeta") {
        auto c = apply_axis(base, SweepAxis::Delta, 0.25);
        auto s = similarity_params(c.main, c.collaborators, c.weights.tau);
        CHECK(s.hessian_dissimilarity == Approx(0.25));
        CHECK(s.grad_offset_sq == Approx(16.0));
    }
    SECTION("remaining axes") {
        CHECK(apply_axis(base, SweepAxis::Beta, 0.3).weights.beta == 0.3);
        CHECK(apply_axis(base, SweepAxis::Eta, 0.3).step.eta == 0.3);
        CHECK(apply_axis(base, SweepAxis::T, 77).horizon == 77);
        auto s = apply_axis(base, SweepAxis::Sigma, 4.0);
        CHECK(s.main.noise_std == 4.0);
        CHECK(s.collaborators[0].noise_std == 4.0);
        CHECK_THROWS_AS(sweep_axis_from_string("gamma"), std::invalid_argument);
        CHECK(sweep_axis_from_string("zeta") == SweepAxis::Zeta);
    }
}
