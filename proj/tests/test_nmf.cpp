#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "shotfactor/nmf.hpp"

using namespace shotfactor;

namespace {

Eigen::MatrixXd random_positive(int r, int c, Rng& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = u(rng);
    return m;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

// Greedy best-cosine matching written independently of the library's scorer.
std::vector<double> matched_cosines(const Eigen::MatrixXd& est, const Eigen::MatrixXd& truth) {
    std::vector<bool> used_e(static_cast<std::size_t>(est.rows())), used_t(static_cast<std::size_t>(truth.rows()));
    std::vector<double> out(static_cast<std::size_t>(truth.rows()));
    for (int round = 0; round < truth.rows(); ++round) {
        double best = -2;
        int bi = 0, bj = 0;
        for (int i = 0; i < est.rows(); ++i)
            for (int j = 0; j < truth.rows(); ++j) {
                if (used_e[static_cast<std::size_t>(i)] || used_t[static_cast<std::size_t>(j)]) continue;
                const double c = cosine(est.row(i).transpose(), truth.row(j).transpose());
                if (c > best) best = c, bi = i, bj = j;
            }
        used_e[static_cast<std::size_t>(bi)] = used_t[static_cast<std::size_t>(bj)] = true;
        out[static_cast<std::size_t>(bj)] = best;
    }
    return out;
}

Eigen::VectorXd dirichlet_row(int k, Rng& rng) {
    std::gamma_distribution<double> g(1.0, 1.0);
    Eigen::VectorXd w(k);
    for (int i = 0; i < k; ++i) w[i] = g(rng);
    return w / w.sum();
}

}  // namespace

TEST_CASE("frobenius loss examples") {
    Rng rng(1);
    const auto x = random_positive(3, 4, rng);
    const auto y = random_positive(3, 4, rng);
    CHECK(frobenius_loss(x, x) == 0.0);
    Eigen::MatrixXd a(1, 2), b(1, 2);
    a << 1, 0;
    b << 0, 1;
    CHECK(frobenius_loss(a, b) == doctest::Approx(2.0));
    CHECK(frobenius_loss(x, y) == doctest::Approx(frobenius_loss(y, x)).epsilon(1e-15));
    CHECK_THROWS_AS(frobenius_loss(a, x), Error);
}

TEST_CASE("KL loss examples") {
    Rng rng(2);
    const auto x = random_positive(3, 5, rng, 0.1, 1.0);
    CHECK(kl_loss(x, x) == doctest::Approx(0.0).epsilon(1e-14));
    Eigen::MatrixXd one(1, 1), two(1, 1);
    one << 1;
    two << 2;
    CHECK(kl_loss(one, two) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-14));

    const Eigen::MatrixXd p = x / x.sum();
    const auto y = random_positive(3, 5, rng, 0.1, 1.0);
    const Eigen::MatrixXd q = y / y.sum();
    double kl = 0.0;
    for (int i = 0; i < p.size(); ++i) kl += p.data()[i] * std::log(p.data()[i] / q.data()[i]);
    CHECK(kl_loss(p, q) == doctest::Approx(kl).epsilon(1e-12));

    Eigen::MatrixXd zero_x(1, 2), zero_y(1, 2);
    zero_x << 0.0, 1.0;
    zero_y << 0.5, 0.0;
    CHECK(std::isinf(kl_loss(zero_x, zero_y)));
    CHECK(kl_loss(zero_y.cwiseProduct(zero_x), zero_y) == doctest::Approx(0.5));
}

TEST_CASE("multiplicative steps leave an exact factorization in place") {
    Rng rng(3);
    Eigen::MatrixXd w = random_positive(6, 2, rng, 0.1, 1.0);
    Eigen::MatrixXd b = random_positive(2, 9, rng, 0.1, 1.0);
    const Eigen::MatrixXd data = w * b;
    for (auto loss : {NmfLoss::kKl, NmfLoss::kFrobenius}) {
        Eigen::MatrixXd w2 = w, b2 = b;
        if (loss == NmfLoss::kKl) {
            nmf_step_kl(w2, b2, data);
        } else {
            nmf_step_frobenius(w2, b2, data);
        }
        CHECK(nmf_loss(loss, data, w2, b2) < 1e-9);
    }
}

TEST_CASE("single steps never increase the loss and keep factors non-negative") {
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(1000 + trial);
        const Eigen::MatrixXd data = random_positive(10, 20, rng);
        for (auto loss : {NmfLoss::kKl, NmfLoss::kFrobenius}) {
            Eigen::MatrixXd w, b;
            nmf_initialize(w, b, data, 3, rng);
            for (int step = 0; step < 20; ++step) {
                const double before = nmf_loss(loss, data, w, b);
                if (loss == NmfLoss::kKl) {
                    nmf_step_kl(w, b, data);
                } else {
                    nmf_step_frobenius(w, b, data);
                }
                REQUIRE(nmf_loss(loss, data, w, b) <= before + 1e-9);
                REQUIRE((w.array() >= 0.0).all());
                REQUIRE((b.array() >= 0.0).all());
            }
        }
    }
}

TEST_CASE("scalar Frobenius iteration converges to the target") {
    Eigen::MatrixXd data(1, 1), w(1, 1), b(1, 1);
    data << 0.7;
    w << 0.2;
    b << 0.9;
    for (int i = 0; i < 10; ++i) nmf_step_frobenius(w, b, data);
    CHECK((w * b)(0, 0) == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("rank-one data is recovered exactly under KL") {
    int hits = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(50 + trial);
        const Eigen::VectorXd u = random_positive(8, 1, rng, 0.1, 2.0);
        const Eigen::RowVectorXd v = random_positive(1, 12, rng, 0.1, 2.0);
        const Eigen::MatrixXd data = u * v;
        Eigen::MatrixXd w, b;
        nmf_initialize(w, b, data, 1, rng);
        for (int s = 0; s < 500; ++s) nmf_step_kl(w, b, data);
        if (nmf_loss(NmfLoss::kKl, data, w, b) < 1e-6) ++hits;
    }
    CHECK(hits >= 19);
}

TEST_CASE("loss traces are non-increasing") {
    for (int trial = 0; trial < 100; ++trial) {
        Rng rng(7000 + trial);
        const Eigen::MatrixXd data = random_positive(8, 15, rng);
        NmfConfig cfg;
        cfg.max_iters = 100;
        cfg.tolerance = 0.0;
        for (auto loss : {NmfLoss::kKl, NmfLoss::kFrobenius}) {
            cfg.loss = loss;
            Eigen::MatrixXd w, b;
            nmf_initialize(w, b, data, 3, rng);
            const auto model = nmf_run(data, w, b, cfg);
            REQUIRE(model.trace.size() == 101);
            for (std::size_t i = 1; i < model.trace.size(); ++i) REQUIRE(model.trace[i] <= model.trace[i - 1] + 1e-9);
        }
    }
}

TEST_CASE("scalar fit") {
    Eigen::MatrixXd data(1, 1);
    data << 0.7;
    NmfConfig cfg;
    for (auto loss : {NmfLoss::kKl, NmfLoss::kFrobenius}) {
        cfg.loss = loss;
        const auto model = fit_nmf(data, 1, cfg);
        CHECK((model.w * model.b)(0, 0) == doctest::Approx(0.7).epsilon(1e-6));
    }
}

TEST_CASE("planted bases are recovered") {
    Rng rng(31);
    const int n = 20, k = 4, v = 100;
    Eigen::MatrixXd b_true = Eigen::MatrixXd::Zero(k, v);
    for (int j = 0; j < k; ++j) {
        for (int t = 0; t < v; ++t) {
            const double d = t - (12.5 + 25.0 * j);
            b_true(j, t) = std::exp(-0.5 * d * d / 16.0);
        }
    }
    Eigen::MatrixXd w_true(n, k);
    for (int i = 0; i < n; ++i) w_true.row(i) = dirichlet_row(k, rng).transpose();
    const Eigen::MatrixXd data = w_true * b_true;
    NmfConfig cfg;
    cfg.seed = 5;
    const auto model = fit_nmf(data, k, cfg);
    for (double c : matched_cosines(model.b, b_true)) CHECK(c >= 0.95);
    CHECK((model.w.array() >= 0.0).all());
    CHECK((model.b.array() >= 0.0).all());
}

TEST_CASE("raw counts need jitter") {
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 6);
    counts(0, 0) = 3;
    counts(1, 1) = 2;
    counts(2, 0) = 1;
    counts(3, 4) = 5;
    NmfConfig raw;
    raw.eps = 0.0;
    raw.restarts = 2;
    const auto bad = fit_nmf(counts, 2, raw);
    CHECK(bad.diverged());

    NmfConfig jittered = raw;
    jittered.jitter = 1e-8;
    jittered.eps = kNmfFloor;
    const auto good = fit_nmf(counts, 2, jittered);
    CHECK_FALSE(good.diverged());
    CHECK(good.converged);
    CHECK(std::isfinite(good.final_loss));
}

TEST_CASE("fit_nmf validates its input and is deterministic") {
    Rng rng(8);
    Eigen::MatrixXd data = random_positive(5, 7, rng);
    NmfConfig cfg;
    cfg.seed = 77;
    CHECK_THROWS_AS(fit_nmf(data, 0, cfg), Error);
    CHECK_THROWS_AS(fit_nmf(data, 6, cfg), Error);
    Eigen::MatrixXd neg = data;
    neg(1, 1) = -0.1;
    CHECK_THROWS_AS(fit_nmf(neg, 2, cfg), Error);
    const auto a = fit_nmf(data, 3, cfg);
    cfg.threads = 4;
    const auto b = fit_nmf(data, 3, cfg);
    CHECK(a.w == b.w);
    CHECK(a.b == b.b);
    CHECK(a.restart == b.restart);
    CHECK(parse_loss("kl") == NmfLoss::kKl);
    CHECK(parse_loss("frobenius") == NmfLoss::kFrobenius);
    CHECK_THROWS_AS(parse_loss("l1"), Error);
}

TEST_CASE("reconstruction is linear in the weights") {
    Rng rng(9);
    FactorModel m;
    m.w = random_positive(3, 2, rng);
    m.b = random_positive(2, 5, rng);
    m.w.row(0) << 0.0, 1.0;
    CHECK(reconstruct(m, 0) == m.b.row(1).transpose());
    const Eigen::VectorXd r1 = reconstruct(m, 1);
    m.w.row(1) *= 2.0;
    CHECK((reconstruct(m, 1) - 2.0 * r1).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd sum = reconstruct(m, 1) + reconstruct(m, 2);
    m.w.row(0) = m.w.row(1) + m.w.row(2);
    CHECK((reconstruct(m, 0) - sum).cwiseAbs().maxCoeff() < 1e-14);
    CHECK_THROWS_AS(reconstruct(m, 3), Error);
}

TEST_CASE("PCA on rank-one centered data") {
    Rng rng(10);
    const Eigen::VectorXd scores = random_positive(12, 1, rng, -1.0, 1.0);
    const Eigen::RowVectorXd dir = random_positive(1, 30, rng);
    const Eigen::RowVectorXd offset = random_positive(1, 30, rng);
    const Eigen::MatrixXd data = (scores * dir).rowwise() + offset;
    const auto pca = fit_pca(data, 2);
    CHECK(pca.explained_variance[0] / pca.total_variance >= 0.99999);
}

TEST_CASE("PCA components are orthonormal and beat NMF in Frobenius error") {
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(400 + trial);
        const Eigen::MatrixXd data = random_positive(15, 40, rng);
        for (int k : {1, 3, 5}) {
            const auto pca = fit_pca(data, k);
            const Eigen::MatrixXd gram = pca.components * pca.components.transpose();
            CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);
            NmfConfig cfg;
            cfg.loss = NmfLoss::kFrobenius;
            cfg.seed = static_cast<std::uint64_t>(trial);
            const auto nmf = fit_nmf(data, k, cfg);
            // Mean plus rank k contains every rank-k product, so PCA can only do better.
            CHECK(frobenius_loss(data, pca.reconstruction()) <= nmf.final_loss + 1e-9);
        }
    }
    Rng rng(1);
    CHECK_THROWS_AS(fit_pca(random_positive(4, 10, rng), 4), Error);
}

TEST_CASE("KL spends a basis on a faint perimeter that Frobenius ignores") {
    // Two bright interior bumps and one faint band around the edge; K = 2.
    const int side = 20, v = side * side;
    Eigen::MatrixXd truth(3, v);
    for (int t = 0; t < v; ++t) {
        const double x = t % side + 0.5, y = t / side + 0.5;
        auto bump = [&](double cx, double cy, double sd) {
            return std::exp(-0.5 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (sd * sd));
        };
        truth(0, t) = bump(7, 10, 1.5);
        truth(1, t) = bump(13, 10, 1.5);
        const double edge = std::min(std::min(x, side - x), std::min(y, side - y));
        truth(2, t) = edge < 2.0 ? 1.0 : 0.0;
    }
    for (int j = 0; j < 3; ++j) truth.row(j) /= truth.row(j).sum();
    Rng rng(12);
    Eigen::MatrixXd weights(30, 3);
    for (int i = 0; i < 30; ++i) weights.row(i) = dirichlet_row(3, rng).transpose();
    const Eigen::MatrixXd data = weights * truth;

    auto perimeter_match = [&](NmfLoss loss) {
        NmfConfig cfg;
        cfg.loss = loss;
        cfg.seed = 3;
        const auto model = fit_nmf(data, 2, cfg);
        double best = 0.0;
        for (int r = 0; r < 2; ++r) best = std::max(best, cosine(model.b.row(r).transpose(), truth.row(2).transpose()));
        return best;
    };
    const double kl = perimeter_match(NmfLoss::kKl);
    const double fro = perimeter_match(NmfLoss::kFrobenius);
    MESSAGE("perimeter cosine: kl " << kl << ", frobenius " << fro);
    CHECK(kl > fro);
}
