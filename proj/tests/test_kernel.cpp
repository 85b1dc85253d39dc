#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "shotfactor/kernel.hpp"

using namespace shotfactor;

TEST_CASE("squared-exponential covariance values") {
    const KernelHyper h{2.0, 3.0};
    CHECK(sq_exp_cov({1, 2}, {1, 2}, h) == doctest::Approx(2.0));
    const KernelHyper unit{1.0, 1.0};
    CHECK(sq_exp_cov({0, 0}, {1, 0}, unit) == doctest::Approx(0.6065306597126334).epsilon(1e-14));
    CHECK(sq_exp_cov({0.3, 4}, {7, -1}, h) == sq_exp_cov({7, -1}, {0.3, 4}, h));
}

TEST_CASE("invalid hyperparameters are rejected") {
    CHECK_THROWS_AS((KernelHyper{0.0, 1.0}.validate()), Error);
    CHECK_THROWS_AS((KernelHyper{1.0, -2.0}.validate()), Error);
    CHECK_THROWS_AS(build_cov_factor(CourtGrid(2, 2, 1), KernelHyper{1.0, 0.0}), Error);
}

TEST_CASE("single tile factor is the square root of variance plus jitter") {
    const KernelHyper h{2.5, 4.0};
    const auto f = build_cov_factor(CourtGrid(1, 1, 1), h);
    REQUIRE(f.dim() == 1);
    CHECK(f.jitter() == doctest::Approx(2.5e-6));
    CHECK(f.lower()(0, 0) == doctest::Approx(std::sqrt(2.5 + 2.5e-6)).epsilon(1e-15));
}

TEST_CASE("two nearly identical tiles factor thanks to jitter, matching the closed-form 2x2 Cholesky") {
    const KernelHyper h{1.0, 1e6};
    const auto f = build_cov_factor(CourtGrid(2, 1, 1), h);
    const double a = 1.0 + f.jitter();
    const double b = std::exp(-0.5 / 1e12);
    const double l11 = std::sqrt(a);
    const double l21 = b / l11;
    const double l22 = std::sqrt(a - l21 * l21);
    CHECK(f.lower()(0, 0) == doctest::Approx(l11).epsilon(1e-12));
    CHECK(f.lower()(1, 0) == doctest::Approx(l21).epsilon(1e-12));
    CHECK(f.lower()(1, 1) == doctest::Approx(l22).epsilon(1e-6));
    CHECK(f.lower()(0, 1) == 0.0);
    CHECK(f.lower()(1, 1) > 0.0);
}

TEST_CASE("L L^T reproduces K + jitter I on a 100-tile grid") {
    const CourtGrid g(10, 10, 1);
    const KernelHyper h{1.3, 2.0};
    const auto f = build_cov_factor(g, h);
    const Eigen::MatrixXd prod = f.lower() * f.lower().transpose();
    for (int i = 0; i < 100; ++i) {
        for (int j = 0; j < 100; ++j) {
            const auto ci = g.center(i), cj = g.center(j);
            const double d2 = (ci.x - cj.x) * (ci.x - cj.x) + (ci.y - cj.y) * (ci.y - cj.y);
            const double k = 1.3 * std::exp(-d2 / 8.0) + (i == j ? f.jitter() : 0.0);
            REQUIRE(std::abs(prod(i, j) - k) < 1e-8);
        }
    }
}

TEST_CASE("jitter grows tenfold until the factorization succeeds") {
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2, 2);
    cov(0, 0) = 1.0;
    cov(1, 1) = -5e-6;
    const auto f = factorize_covariance(cov, 1e-6);
    CHECK(f.jitter() == doctest::Approx(1e-5));

    cov(1, 1) = -1.0;
    try {
        factorize_covariance(cov, 1e-6);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNumeric);
        CHECK(std::string(e.what()).find("0.001") != std::string::npos);
    }
}

TEST_CASE("prior draws have the right first two moments") {
    const CourtGrid g(2, 2, 1);
    const KernelHyper h{1.7, 1.5};
    const auto f = build_cov_factor(g, h);
    Rng rng(123);
    constexpr int kDraws = 10000;
    std::vector<std::vector<double>> comp(4);
    for (int s = 0; s < kDraws; ++s) {
        const auto z = f.sample(rng);
        for (int v = 0; v < 4; ++v) comp[static_cast<std::size_t>(v)].push_back(z[v]);
    }
    for (int v = 0; v < 4; ++v) {
        const auto& c = comp[static_cast<std::size_t>(v)];
        const double var_true = 1.7 + f.jitter();
        const double se = std::sqrt(var_true / kDraws);
        CHECK(std::abs(oracle::mean(c)) < 4.0 * se);
        CHECK(std::abs(oracle::variance(c) - var_true) < 0.1 * var_true);
    }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    const auto f = build_cov_factor(CourtGrid(3, 3, 1), KernelHyper{});
    Rng a(9), b(9);
    CHECK(f.sample(a) == f.sample(b));
}
