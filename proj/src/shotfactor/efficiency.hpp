#pragma once

// Hierarchical logistic model of make probability per shot type, fit by a
// Gibbs sampler over shot types, logits and per-type variances.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"
#include "shotfactor/court.hpp"

namespace shotfactor {

// Loadings with basis mass folded into the weights: Wbar_nk = W_nk sum_v B_kv,
// Bbar_k = B_k / sum_v B_kv.
struct AdjustedLoadings {
    Eigen::MatrixXd weights;    // N x K
    Eigen::MatrixXd bases;      // K x V, rows sum to 1
    std::vector<int> kept;      // original basis index of each row
    std::vector<std::string> warnings;

    int rank() const { return static_cast<int>(bases.rows()); }
};

// Bases with zero mass are dropped (and reported in `warnings`).
AdjustedLoadings adjust_weights(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b);

struct TypePosterior {
    Eigen::VectorXd probs;
    bool degenerate = false;  // no basis reaches this tile; probs is uniform
};

// p(k | x) proportional to wbar_k Bbar_{k, tile}.
TypePosterior shot_type_posterior(int tile, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases);

// sum_k inv_logit(logit_k) p(k | x).
double predict_fg_pct(int tile, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                      const Eigen::VectorXd& logits);

struct EfficiencyPriors {
    double global_variance = 100.0;  // sigma_0^2 on beta_0k
    double shape = 0.1;              // a
    double rate = 0.1;               // b
};

// Draw sigma_k^2 ~ InvGamma(a + N/2, b + sum_n (beta_nk - beta_0k)^2 / 2).
double gibbs_sigma_update(std::span<const double> logits, double global_mean, double shape, double rate, Rng& rng);

// Shots of the players covered by the loadings, flattened.
struct EfficiencyData {
    std::vector<int> player;  // row into the loadings
    std::vector<int> tile;
    std::vector<std::uint8_t> made;
    int num_players = 0;

    std::size_t size() const { return player.size(); }
};

// Shots whose player is not in `players` are skipped.
EfficiencyData make_efficiency_data(std::span<const ShotEvent> shots, std::span<const std::string> players,
                                    const CourtGrid& grid);

struct EfficiencyState {
    Eigen::VectorXd global;    // beta_0, length K
    Eigen::VectorXd variance;  // sigma^2, length K
    Eigen::MatrixXd logits;    // beta, N x K
};

// Shot types drawn from p(k | x). When `logits` is given, the draw also
// conditions on the recorded outcome, p(k | x, y) ~ p(k | x) p(y | beta_nk).
std::vector<int> sample_shot_types(const EfficiencyData& data, const AdjustedLoadings& loadings, Rng& rng,
                                   const Eigen::MatrixXd* logits = nullptr);

// Per-(player, type) attempt and make counts under a type assignment.
struct TypeTallies {
    Eigen::MatrixXd attempts;  // N x K
    Eigen::MatrixXd makes;     // N x K
};
TypeTallies tally_types(const EfficiencyData& data, std::span<const int> types, int rank);

// Bernoulli log-likelihood of the tallies for one player's logits.
double player_loglik(const Eigen::VectorXd& logits, const TypeTallies& tallies, int player);

// One update of (beta_0, beta) given sigma^2 and the tallies: each player's
// deviation beta_n - beta_0 gets an elliptical slice step under its
// N(0, diag sigma^2) prior, then beta_0 is drawn from its normal full
// conditional. Player n uses derive_seed(seed, n); beta_0 uses stream N.
void gibbs_beta_step(EfficiencyState& state, const TypeTallies& tallies, const EfficiencyPriors& priors,
                     std::uint64_t seed, int threads = 1);

struct EfficiencyConfig {
    int sweeps = 2000;
    int burn_in = 500;
    std::uint64_t seed = 0;
    EfficiencyPriors priors;
    int threads = 1;
};

struct EfficiencyFit {
    EfficiencyState mean;                 // posterior means after burn-in
    Eigen::MatrixXd mean_probability;     // posterior mean of inv_logit(beta), N x K
    Eigen::VectorXd mean_global_probability;
    Eigen::VectorXd global_sd;            // posterior sd of beta_0
    Eigen::MatrixXd variance_trace;       // sweeps x K
    Eigen::MatrixXd global_trace;         // sweeps x K
    Eigen::VectorXd loglik_trace;         // complete-data log-likelihood per sweep
};

EfficiencyFit fit_efficiency(const EfficiencyData& data, const AdjustedLoadings& loadings,
                             const EfficiencyConfig& config);

// predict_fg_pct at every tile center for one player's loadings and logits.
Eigen::VectorXd efficiency_surface(const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                                   const Eigen::VectorXd& logits);

// Population surface: beta_0 with the mean adjusted loadings as the type mix.
Eigen::VectorXd global_efficiency_surface(const AdjustedLoadings& loadings, const Eigen::VectorXd& global);

}  // namespace shotfactor
