#include <catch2/catch_amalgamated.hpp>

#include <collabopt/objective.hpp>

#include <cmath>
#include <random>

using namespace collabopt;
using Catch::Approx;

namespace {

QuadraticTask task1d(double a, double xs, double sigma = 0.0, double M = 0.0) {
    return QuadraticTask{{a}, {xs}, sigma, M};
}

// Monte-Carlo mean/variance of the first coordinate of sample_gradient.
struct Moments {
    Vec mean, var;
};

Moments sample_moments(const QuadraticTask& t, const Vec& x, int n, std::uint64_t seed) {
    std::size_t d = x.size();
    Vec s1(d, 0.0), s2(d, 0.0);
    for (int i = 0; i < n; ++i) {
        NormalStream st(StreamKey{seed, 0, static_cast<std::uint64_t>(i), StreamDomain::Gradient});
        auto g = sample_gradient(t, x, st, 0);
        for (std::size_t j = 0; j < d; ++j) {
            s1[j] += g.value[j];
            s2[j] += g.value[j] * g.value[j];
        }
    }
    Moments m{Vec(d), Vec(d)};
    for (std::size_t j = 0; j < d; ++j) {
        m.mean[j] = s1[j] / n;
        m.var[j] = (s2[j] - n * m.mean[j] * m.mean[j]) / (n - 1);
    }
    return m;
}

}  // namespace

TEST_CASE("eval_loss examples", "[objective]") {
    CHECK(eval_loss(task1d(1, 0), Vec{0.0}) == 0.0);
    CHECK(eval_loss(task1d(1, 0), Vec{2.0}) == 2.0);
    CHECK(eval_loss(task1d(2, 2), Vec{0.0}) == 4.0);
    QuadraticTask t{{1.0, 3.0}, {0.0, 1.0}, 0.0, 0.0};
    CHECK(eval_loss(t, Vec{1.0, 3.0}) == Approx(0.5 * 1 + 0.5 * 3 * 4));
    CHECK_THROWS_AS(eval_loss(t, Vec{1.0}), std::invalid_argument);
}

TEST_CASE("true_gradient examples", "[objective]") {
    CHECK(true_gradient(task1d(1, 0), Vec{3.0}) == Vec{3.0});
    CHECK(true_gradient(task1d(2, 2), Vec{2.0}) == Vec{0.0});
    CHECK(true_gradient(task1d(2, 2), Vec{0.0}) == Vec{-4.0});
    CHECK_THROWS_AS(true_gradient(task1d(1, 0), Vec{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("task validation", "[objective]") {
    CHECK_THROWS_AS(task1d(0.0, 0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(task1d(1.0, 0, -1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS(task1d(1.0, 0, 0.0, -1.0).validate(), std::invalid_argument);
    CHECK_THROWS_AS((QuadraticTask{{1.0, 1.0}, {0.0}, 0, 0}).validate(), std::invalid_argument);
    CHECK_NOTHROW(task1d(2.0, 1.0, 3.0, 0.5).validate());
}

TEST_CASE("noiseless sample equals true gradient", "[objective]") {
    auto t = task1d(2, 2);
    NormalStream st(StreamKey{1, 0, 0, StreamDomain::Gradient});
    auto g = sample_gradient(t, Vec{0.7}, st, 3);
    CHECK(g.value == true_gradient(t, Vec{0.7}));
    CHECK(g.agent == 3u);
}

TEST_CASE("gradient samples are unbiased", "[objective][property]") {
    const int n = 100000;
    SECTION("sigma 10, 1d") {
        auto t = task1d(2, 2, 10.0);
        Vec x{0.5};
        auto m = sample_moments(t, x, n, 5);
        double truth = true_gradient(t, x)[0];
        CHECK(std::abs(m.mean[0] - truth) < 3.0 * 10.0 / std::sqrt(double(n)));
    }
    SECTION("multi-d with gradient-proportional noise") {
        QuadraticTask t{{1.0, 2.0, 0.5}, {0.0, -1.0, 3.0}, 0.7, 0.3};
        Vec x{1.0, 1.0, 1.0};
        auto m = sample_moments(t, x, n, 6);
        auto g = true_gradient(t, x);
        for (std::size_t j = 0; j < x.size(); ++j)
            CHECK(std::abs(m.mean[j] - g[j]) < 3.0 * std::sqrt(m.var[j] / n));
    }
}

TEST_CASE("gradient noise variance law", "[objective][property]") {
    const int n = 100000;
    SECTION("sigma 1, M 1, gradient norm squared 4") {
        auto t = task1d(1, 0, 1.0, 1.0);
        auto m = sample_moments(t, Vec{2.0}, n, 7);
        CHECK(m.var[0] == Approx(5.0).epsilon(0.10));
    }
    SECTION("isotropic split of the relative term") {
        QuadraticTask t{{1.0, 2.0}, {0.0, 0.0}, 0.5, 2.0};
        Vec x{1.0, 1.0};
        double gn = 1.0 + 4.0;
        auto m = sample_moments(t, x, n, 8);
        double expect = 0.25 + 2.0 * gn / 2.0;
        for (double v : m.var) CHECK(v == Approx(expect).epsilon(0.10));
    }
}

TEST_CASE("sampling is deterministic in the stream key", "[objective]") {
    QuadraticTask t{{1.0, 2.0}, {0.0, 1.0}, 3.0, 0.1};
    Vec x{0.3, -0.2};
    NormalStream a(StreamKey{9, 2, 17, StreamDomain::Gradient});
    NormalStream b(StreamKey{9, 2, 17, StreamDomain::Gradient});
    CHECK(sample_gradient(t, x, a, 2).value == sample_gradient(t, x, b, 2).value);
}

TEST_CASE("similarity_params examples", "[objective]") {
    SECTION("default two-agent instance") {
        auto s = similarity_params(task1d(1, 0), {task1d(2, 2)}, Vec{1.0});
        CHECK(s.hessian_dissimilarity == 1.0);
        CHECK(s.grad_offset_sq == 16.0);
        CHECK(s.smoothness == 1.0);
        CHECK(s.pl_constant == 1.0);
        CHECK(s.grad_scale_mismatch == 1.0);
    }
    SECTION("identical copy") {
        auto s = similarity_params(task1d(1.5, 0.2), {task1d(1.5, 0.2)}, Vec{1.0});
        CHECK(s.hessian_dissimilarity == 0.0);
        CHECK(s.grad_offset_sq == 0.0);
        CHECK(s.grad_scale_mismatch == 0.0);
    }
    SECTION("curvature shift with compensated optimum") {
        double dp = 0.3, zp = 5.0;
        auto s = similarity_params(task1d(1, 0), {task1d(1 + dp, zp / (1 + dp))}, Vec{1.0});
        CHECK(s.hessian_dissimilarity == Approx(dp));
        CHECK(s.grad_offset_sq == Approx(zp * zp));
    }
    SECTION("tau-weighted offset and worst-case mismatch") {
        QuadraticTask main{{1.0, 4.0}, {0.0, 0.0}, 1.0, 0.5};
        QuadraticTask c1{{2.0, 4.0}, {1.0, 0.0}, 2.0, 0.0};
        QuadraticTask c2{{1.0, 1.0}, {0.0, 2.0}, 0.0, 0.25};
        auto s = similarity_params(main, {c1, c2}, Vec{0.25, 0.75});
        CHECK(s.smoothness == 4.0);
        CHECK(s.pl_constant == 1.0);
        CHECK(s.hessian_dissimilarity == 3.0);
        CHECK(s.agent_offset_sq == Vec{4.0, 4.0});
        CHECK(s.grad_offset_sq == Approx(4.0));
        CHECK(s.grad_scale_mismatch == Approx(1.0));
        CHECK(s.noise_scales == Vec{0.5, 0.0, 0.25});
    }
    SECTION("errors") {
        CHECK_THROWS_AS(similarity_params(task1d(1, 0), {}, Vec{}), std::invalid_argument);
        CHECK_THROWS_AS(similarity_params(task1d(1, 0), {task1d(1, 0)}, Vec{0.5}), std::invalid_argument);
        CHECK_THROWS_AS(similarity_params(task1d(1, 0), {QuadraticTask{{1, 1}, {0, 0}, 0, 0}}, Vec{1.0}),
                        std::invalid_argument);
    }
}

TEST_CASE("gradient similarity holds at random points", "[objective][property]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> curv(0.2, 3.0), opt(-3.0, 3.0), pt(-20.0, 20.0);
    for (int inst = 0; inst < 50; ++inst) {
        std::size_t d = 1 + inst % 3;
        QuadraticTask main{Vec(d), Vec(d), 0, 0}, col{Vec(d), Vec(d), 0, 0};
        for (std::size_t j = 0; j < d; ++j) {
            main.curvature[j] = curv(rng);
            main.optimum[j] = opt(rng);
            col.curvature[j] = curv(rng);
            col.optimum[j] = opt(rng);
        }
        auto cert = certified_similarity(main, {col});
        for (int k = 0; k < 1000; ++k) {
            Vec x(d);
            for (auto& v : x) v = pt(rng);
            auto g0 = true_gradient(main, x), g1 = true_gradient(col, x);
            double lhs = 0, n0 = 0;
            for (std::size_t j = 0; j < d; ++j) {
                lhs += (g1[j] - g0[j]) * (g1[j] - g0[j]);
                n0 += g0[j] * g0[j];
            }
            double rhs = cert.m * n0 + cert.zeta_sq[0];
            REQUIRE(lhs <= rhs * (1 + 1e-12) + 1e-12);
        }
    }
}

TEST_CASE("reported similarity is exact for pure translations and pure scalings", "[objective][property]") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    SECTION("translated copy: m = 0 and the offset is attained") {
        QuadraticTask main{{1.0, 2.0}, {0.5, -0.5}, 0, 0};
        QuadraticTask col{{1.0, 2.0}, {1.5, 0.5}, 0, 0};
        auto s = similarity_params(main, {col}, Vec{1.0});
        CHECK(s.grad_scale_mismatch == 0.0);
        for (int k = 0; k < 1000; ++k) {
            Vec x{u(rng), u(rng)};
            auto g0 = true_gradient(main, x), g1 = true_gradient(col, x);
            double lhs = std::pow(g1[0] - g0[0], 2) + std::pow(g1[1] - g0[1], 2);
            REQUIRE(lhs == Approx(s.grad_offset_sq));
        }
        auto cert = certified_similarity(main, {col});
        CHECK(cert.m == 0.0);
        CHECK(cert.zeta_sq[0] == s.grad_offset_sq);
    }
    SECTION("scaled copy: zeta = 0 and A4 holds with the reported m") {
        QuadraticTask main{{1.0, 2.0}, {0.5, -0.5}, 0, 0};
        QuadraticTask col{{1.5, 5.0}, {0.5, -0.5}, 0, 0};
        auto s = similarity_params(main, {col}, Vec{1.0});
        CHECK(s.grad_offset_sq == 0.0);
        CHECK(s.grad_scale_mismatch == Approx(2.25));
        for (int k = 0; k < 1000; ++k) {
            Vec x{u(rng), u(rng)};
            auto g0 = true_gradient(main, x), g1 = true_gradient(col, x);
            double lhs = std::pow(g1[0] - g0[0], 2) + std::pow(g1[1] - g0[1], 2);
            REQUIRE(lhs <= s.grad_scale_mismatch * (g0[0] * g0[0] + g0[1] * g0[1]) * (1 + 1e-12));
        }
    }
}

TEST_CASE("mean estimation task", "[objective]") {
    auto t = mean_estimation_task(0.0, 1.0);
    CHECK(t == QuadraticTask{{1.0}, {0.0}, 1.0, 0.0});
    auto t0 = mean_estimation_task(0.3, 2.0), t1 = mean_estimation_task(-1.2, 2.0);
    auto s = similarity_params(t0, {t1}, Vec{1.0});
    CHECK(s.smoothness == 1.0);
    CHECK(s.pl_constant == 1.0);
    CHECK(s.grad_offset_sq == Approx(1.5 * 1.5));
    CHECK_THROWS_AS(mean_estimation_task(0.0, -1.0), std::invalid_argument);
}
