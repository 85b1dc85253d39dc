#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "shotfactor/efficiency.hpp"

using namespace shotfactor;

namespace {

Eigen::MatrixXd random_positive(int r, int c, Rng& rng, double lo = 0.05, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::MatrixXd m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = u(rng);
    return m;
}

// Two tiles, each covered by exactly one basis, so shot types are known.
AdjustedLoadings disjoint_loadings(int players) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(2, 2);
    Eigen::MatrixXd w = Eigen::MatrixXd::Constant(players, 2, 0.5);
    return adjust_weights(w, b);
}

void add_shots(EfficiencyData& d, int player, int tile, int attempts, int makes) {
    for (int i = 0; i < attempts; ++i) {
        d.player.push_back(player);
        d.tile.push_back(tile);
        d.made.push_back(i < makes ? 1 : 0);
    }
}

// Posterior mean of inv_logit(beta) for `makes` of `attempts` under beta ~ N(0, prior_var).
double binomial_logit_posterior_mean(int attempts, int makes, double prior_var) {
    auto logd = [&](double b) {
        return -0.5 * b * b / prior_var + makes * std::log(oracle::sigmoid(b)) +
               (attempts - makes) * std::log(1.0 - oracle::sigmoid(b));
    };
    return oracle::grid_expectation(logd, oracle::sigmoid, -15.0, 15.0);
}

}  // namespace

TEST_CASE("adjusted loadings") {
    Rng rng(1);
    Eigen::MatrixXd b = random_positive(3, 8, rng);
    for (int k = 0; k < 3; ++k) b.row(k) /= b.row(k).sum();
    const Eigen::MatrixXd w = random_positive(5, 3, rng);
    const auto same = adjust_weights(w, b);
    CHECK((same.weights - w).cwiseAbs().maxCoeff() < 1e-15);

    Eigen::MatrixXd b1(1, 3);
    b1 << 1.0, 0.5, 1.5;
    Eigen::MatrixXd w1(1, 1);
    w1 << 2.0;
    const auto one = adjust_weights(w1, b1);
    CHECK(one.weights(0, 0) == doctest::Approx(6.0));
    CHECK(one.bases.sum() == doctest::Approx(1.0));

    const Eigen::MatrixXd braw = random_positive(4, 10, rng, 0.0, 3.0);
    const Eigen::MatrixXd wraw = random_positive(6, 4, rng, 0.0, 2.0);
    const auto adj = adjust_weights(wraw, braw);
    CHECK(((adj.weights * adj.bases) - wraw * braw).cwiseAbs().maxCoeff() < 1e-9);
    for (int k = 0; k < 4; ++k) CHECK(adj.bases.row(k).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("zero-mass bases are dropped with a warning") {
    Eigen::MatrixXd b(2, 3);
    b << 1, 2, 3, 0, 0, 0;
    Eigen::MatrixXd w = Eigen::MatrixXd::Ones(2, 2);
    const auto adj = adjust_weights(w, b);
    CHECK(adj.rank() == 1);
    CHECK(adj.kept == std::vector<int>{0});
    CHECK(adj.warnings.size() == 1);
    CHECK_THROWS_AS(adjust_weights(w, Eigen::MatrixXd::Zero(2, 3)), Error);
    Eigen::MatrixXd neg = w;
    neg(0, 0) = -1;
    CHECK_THROWS_AS(adjust_weights(neg, b), Error);
}

TEST_CASE("shot type posterior") {
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Constant(1, 4, 0.25);
    const auto p1 = shot_type_posterior(2, Eigen::VectorXd::Constant(1, 3.0), b1);
    CHECK(p1.probs.size() == 1);
    CHECK(p1.probs[0] == 1.0);

    Eigen::MatrixXd b2(2, 3);
    b2 << 0.2, 0.3, 0.5, 0.5, 0.0, 0.5;
    const auto p2 = shot_type_posterior(1, Eigen::Vector2d(0.4, 0.6), b2);
    CHECK(p2.probs[0] == 1.0);
    CHECK(p2.probs[1] == 0.0);
    CHECK_FALSE(p2.degenerate);

    Eigen::MatrixXd holes(2, 3);
    holes << 0.5, 0.0, 0.5, 0.5, 0.0, 0.5;
    const auto deg = shot_type_posterior(1, Eigen::Vector2d(1, 1), holes);
    CHECK(deg.degenerate);
    CHECK(deg.probs[0] == doctest::Approx(0.5));
}

TEST_CASE("shot type posterior matches direct normalization on 100 random models") {
    for (int model = 0; model < 100; ++model) {
        Rng rng(500 + model);
        const int k = 1 + model % 6;
        const Eigen::MatrixXd b = random_positive(k, 20, rng, 0.0, 1.0);
        const Eigen::VectorXd w = random_positive(k, 1, rng, 0.0, 1.0);
        const Eigen::VectorXd beta = 3.0 * random_positive(k, 1, rng, -1.0, 1.0);
        for (int v = 0; v < 20; ++v) {
            double denom = 0.0;
            for (int j = 0; j < k; ++j) denom += w[j] * b(j, v);
            const auto post = shot_type_posterior(v, w, b);
            REQUIRE(std::abs(post.probs.sum() - 1.0) < 1e-12);
            double brute_fg = 0.0;
            for (int j = 0; j < k; ++j) {
                REQUIRE(std::abs(post.probs[j] - w[j] * b(j, v) / denom) < 1e-12);
                brute_fg += oracle::sigmoid(beta[j]) * w[j] * b(j, v) / denom;
            }
            const double fg = predict_fg_pct(v, w, b, beta);
            REQUIRE(fg > 0.0);
            REQUIRE(fg < 1.0);
            REQUIRE(std::abs(fg - brute_fg) < 1e-12);
        }
    }
}

TEST_CASE("predicted make probability examples") {
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Ones(1, 2);
    CHECK(predict_fg_pct(0, Eigen::VectorXd::Ones(1), b1, Eigen::VectorXd::Zero(1)) == doctest::Approx(0.5));
    Eigen::MatrixXd b2(2, 2);
    b2 << 1.0, 0.5, 0.0, 0.5;
    CHECK(predict_fg_pct(0, Eigen::Vector2d(1, 1), b2, Eigen::Vector2d(2, -5)) ==
          doctest::Approx(0.8807970779778823).epsilon(1e-12));
    const double mid = predict_fg_pct(1, Eigen::Vector2d(1, 3), b2, Eigen::Vector2d(2, -5));
    CHECK(mid <= oracle::sigmoid(2.0));
    CHECK(mid >= oracle::sigmoid(-5.0));
    CHECK(inv_logit(800.0) == 1.0);
    CHECK(inv_logit(-800.0) >= 0.0);
    CHECK(std::isfinite(log_inv_logit(-800.0)));
    CHECK(std::isfinite(log1m_inv_logit(800.0)));
}

TEST_CASE("variance update with zero deviations draws from the prior-shaped inverse gamma") {
    Rng rng(3);
    std::vector<double> logits{0.4, 0.4};
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) draws.push_back(gibbs_sigma_update(logits, 0.4, 2.0, 1.5, rng));
    // shape 3, rate 1.5
    CHECK(oracle::mean(draws) == doctest::Approx(1.5 / 2.0).epsilon(0.02));
}

TEST_CASE("variance update matches the inverse gamma mean") {
    Rng rng(4);
    std::vector<double> logits{1.0, 1.0, 1.0};
    std::vector<double> draws;
    for (int i = 0; i < 100000; ++i) draws.push_back(gibbs_sigma_update(logits, 0.0, 0.1, 0.1, rng));
    CHECK(oracle::mean(draws) == doctest::Approx(1.6 / 0.6).epsilon(0.02));
    for (double d : draws) REQUIRE(d > 0.0);
}

TEST_CASE("variance update matches grid integration of the unnormalized posterior") {
    const double a = 2.0, b = 1.0, global = 0.2;
    std::vector<double> logits{0.9, -1.4};
    auto log_post_u = [&](double u) {
        const double s = std::exp(u);
        double lp = -(a + 1.0) * std::log(s) - b / s;
        for (double beta : logits) lp += -0.5 * std::log(2.0 * M_PI * s) - (beta - global) * (beta - global) / (2.0 * s);
        return lp + u;  // ds = s du
    };
    const double expected = oracle::grid_expectation(log_post_u, [](double u) { return std::exp(u); }, -20.0, 20.0);
    Rng rng(5);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) sum += gibbs_sigma_update(logits, global, a, b, rng);
    CHECK(sum / 100000.0 == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("without observations the logit chain targets the prior") {
    const EfficiencyPriors priors{1.0, 3.0, 2.0};
    EfficiencyState state{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Zero(4, 1)};
    TypeTallies none{Eigen::MatrixXd::Zero(4, 1), Eigen::MatrixXd::Zero(4, 1)};
    Rng rng(6);
    std::vector<double> chain;
    for (int s = 0; s < 40000; ++s) {
        gibbs_beta_step(state, none, priors, derive_seed(17, s));
        const Eigen::VectorXd col = state.logits.col(0);
        state.variance[0] = gibbs_sigma_update({col.data(), 4}, state.global[0], priors.shape, priors.rate, rng);
        chain.push_back(state.global[0]);
    }
    CHECK(std::abs(oracle::mean(chain)) < 4.0 * oracle::batch_means_se(chain));
    CHECK(oracle::variance(chain) == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("single-player single-basis posterior matches grid integration") {
    // sigma^2 held at 100 and beta_0 ~ N(0, 100), so marginally beta ~ N(0, 200).
    const EfficiencyPriors priors{100.0, 0.1, 0.1};
    TypeTallies t{Eigen::MatrixXd::Constant(1, 1, 100.0), Eigen::MatrixXd::Constant(1, 1, 70.0)};
    EfficiencyState state{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 100.0), Eigen::MatrixXd::Zero(1, 1)};
    std::vector<double> chain;
    for (int s = 0; s < 60000; ++s) {
        gibbs_beta_step(state, t, priors, derive_seed(23, s));
        if (s >= 1000) chain.push_back(inv_logit(state.logits(0, 0)));
    }
    const double expected = binomial_logit_posterior_mean(100, 70, 200.0);
    CHECK(std::abs(oracle::mean(chain) - expected) < 3.0 * oracle::batch_means_se(chain));
}

TEST_CASE("more makes raise the posterior make probability") {
    auto posterior = [](double makes) {
        const EfficiencyPriors priors{100.0, 0.1, 0.1};
        TypeTallies t{Eigen::MatrixXd::Constant(1, 1, 100.0), Eigen::MatrixXd::Constant(1, 1, makes)};
        EfficiencyState state{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 4.0), Eigen::MatrixXd::Zero(1, 1)};
        double sum = 0.0;
        for (int s = 0; s < 20000; ++s) {
            gibbs_beta_step(state, t, priors, derive_seed(29, s));
            sum += inv_logit(state.logits(0, 0));
        }
        return sum / 20000.0;
    };
    CHECK(posterior(60) < posterior(70));
}

TEST_CASE("shot type sampling") {
    Rng rng(8);
    EfficiencyData d;
    d.num_players = 1;
    add_shots(d, 0, 0, 50, 20);
    Eigen::MatrixXd b1 = Eigen::MatrixXd::Ones(1, 3);
    const auto one = adjust_weights(Eigen::MatrixXd::Ones(1, 1), b1);
    for (int t : sample_shot_types(d, one, rng)) CHECK(t == 0);

    Eigen::MatrixXd b3(3, 2);
    b3 << 0.0, 1.0, 1.0, 1.0, 0.0, 1.0;
    const auto point = adjust_weights(Eigen::MatrixXd::Ones(1, 3), b3);
    for (int t : sample_shot_types(d, point, rng)) CHECK(t == 1);
}

TEST_CASE("shot type frequencies match the posterior, with and without the outcome") {
    Rng rng(9);
    Eigen::MatrixXd b(3, 1);
    b << 0.2, 0.5, 0.3;
    Eigen::MatrixXd w(1, 3);
    w << 1.0, 1.0, 1.0;
    const auto loadings = adjust_weights(w, Eigen::MatrixXd(b.replicate(1, 2)));
    EfficiencyData d;
    d.num_players = 1;
    add_shots(d, 0, 0, 10000, 10000);
    Eigen::MatrixXd logits(1, 3);
    logits << 1.0, -2.0, 0.0;

    const auto prior_post = shot_type_posterior(0, loadings.weights.row(0).transpose(), loadings.bases).probs;
    Eigen::VectorXd made_post = prior_post;
    for (int k = 0; k < 3; ++k) made_post[k] *= oracle::sigmoid(logits(0, k));
    made_post /= made_post.sum();

    for (const Eigen::MatrixXd* cond : {static_cast<const Eigen::MatrixXd*>(nullptr), static_cast<const Eigen::MatrixXd*>(&logits)}) {
        const Eigen::VectorXd target = cond ? made_post : prior_post;
        const auto types = sample_shot_types(d, loadings, rng, cond);
        for (int k = 0; k < 3; ++k) {
            const double freq = std::count(types.begin(), types.end(), k) / 10000.0;
            const double se = std::sqrt(target[k] * (1.0 - target[k]) / 10000.0);
            CHECK(std::abs(freq - target[k]) < 3.0 * se);
        }
    }
}

TEST_CASE("low-data players shrink toward the global mean") {
    const int players = 6;
    const auto loadings = disjoint_loadings(players);
    EfficiencyData d;
    d.num_players = players;
    // Player 0 never shoots basis 1; the rest shoot it at varied rates.
    add_shots(d, 0, 0, 200, 100);
    add_shots(d, 1, 1, 200, 170);
    add_shots(d, 2, 1, 200, 60);
    for (int p = 3; p < players; ++p) {
        add_shots(d, p, 0, 100, 50);
        add_shots(d, p, 1, 100, 45);
    }
    EfficiencyConfig cfg;
    cfg.sweeps = 3000;
    cfg.burn_in = 500;
    cfg.seed = 31;
    const auto fit = fit_efficiency(d, loadings, cfg);
    const double g = fit.mean.global[1];
    const double low = std::abs(fit.mean.logits(0, 1) - g);
    const double high = std::min(std::abs(fit.mean.logits(1, 1) - g), std::abs(fit.mean.logits(2, 1) - g));
    CHECK(low < high);
}

TEST_CASE("efficiency fit is reproducible, thread independent and keeps variances positive") {
    const int players = 5;
    const auto loadings = disjoint_loadings(players);
    EfficiencyData d;
    d.num_players = players;
    for (int p = 0; p < players; ++p) {
        add_shots(d, p, 0, 40 + 5 * p, 20 + p);
        add_shots(d, p, 1, 30, 10 + 2 * p);
    }
    EfficiencyConfig cfg;
    cfg.sweeps = 300;
    cfg.burn_in = 100;
    cfg.seed = 4;
    const auto a = fit_efficiency(d, loadings, cfg);
    cfg.threads = 3;
    const auto b = fit_efficiency(d, loadings, cfg);
    CHECK(a.mean.logits == b.mean.logits);
    CHECK(a.variance_trace == b.variance_trace);
    CHECK((a.variance_trace.array() > 0.0).all());
    CHECK(a.mean.logits.allFinite());
    cfg.burn_in = 300;
    CHECK_THROWS_AS(fit_efficiency(d, loadings, cfg), Error);
    CHECK_THROWS_AS(fit_efficiency(EfficiencyData{}, loadings, EfficiencyConfig{}), Error);
}

TEST_CASE("efficiency surfaces") {
    Rng rng(12);
    const auto adj = adjust_weights(random_positive(4, 3, rng), random_positive(3, 10, rng));
    const auto flat = global_efficiency_surface(adj, Eigen::VectorXd::Zero(3));
    for (int v = 0; v < 10; ++v) CHECK(flat[v] == doctest::Approx(0.5));

    const Eigen::Vector3d global(0.3, -1.0, 1.2);
    const Eigen::VectorXd mean_w = adj.weights.colwise().mean().transpose();
    CHECK((efficiency_surface(mean_w, adj.bases, global) - global_efficiency_surface(adj, global)).cwiseAbs().maxCoeff() <
          1e-15);

    Eigen::MatrixXd b(2, 2);
    b << 1.0, 0.5, 0.0, 0.5;
    const auto s = efficiency_surface(Eigen::Vector2d(1, 1), b, Eigen::Vector2d(0.7, -3.0));
    CHECK(s[0] == doctest::Approx(oracle::sigmoid(0.7)).epsilon(1e-14));
}

TEST_CASE("efficiency data skips unknown players") {
    std::vector<ShotEvent> shots{{"a", 1, 1, true}, {"x", 2, 2, false}, {"b", 3, 3, false}};
    std::vector<std::string> players{"a", "b"};
    const auto d = make_efficiency_data(shots, players, CourtGrid(35, 50, 2.5, 2.0));
    CHECK(d.size() == 2);
    CHECK(d.player == std::vector<int>{0, 1});
    CHECK(d.made == std::vector<std::uint8_t>{1, 0});
}
