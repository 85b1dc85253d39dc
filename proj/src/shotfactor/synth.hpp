#pragma once

// Synthetic shot data with planted bases, loadings and logits.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"
#include "shotfactor/court.hpp"

namespace shotfactor {

// Shot-type archetypes available to make_planted_bases, in slot order.
enum class Archetype { kRim, kCorners, kTopArc, kMidRange, kLeftWing, kRightWing, kLeftBaseline, kRightBaseline };

inline constexpr int kArchetypeSlots = 8;

std::string_view archetype_name(int slot);

// Unit-volume surfaces (sum_v B_kv dA = 1) for the first k archetype slots,
// with centers and widths jittered per seed. Throws when k exceeds the slot
// count or when jitter pushes a pairwise cosine similarity to 0.3 or above.
Eigen::MatrixXd make_planted_bases(const CourtGrid& grid, int k, std::uint64_t seed);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct PlantedTruth {
    std::vector<std::string> players;
    Eigen::MatrixXd bases;          // K x V, unit volume
    Eigen::MatrixXd weights;        // N x K, rows sum to 1
    Eigen::VectorXd global_logits;  // K
    Eigen::MatrixXd logits;         // N x K
    Eigen::VectorXd budgets;        // expected shots per player

    int rank() const { return static_cast<int>(bases.rows()); }
};

// Per-tile Poisson counts from M * sum_k wbar_k B_k, located uniformly within
// each tile. Weights are normalized to sum to one first.
std::vector<ShotEvent> sample_player_shots(const std::string& player, const Eigen::VectorXd& weights,
                                           const Eigen::MatrixXd& bases, double budget, const CourtGrid& grid,
                                           Rng& rng);

// Each shot's type is drawn from p(k | x) ~ w_k B_k(x), then its outcome
// from Bernoulli(inv_logit(logit_k)). Overwrites ShotEvent::made.
void sample_outcomes(std::vector<ShotEvent>& shots, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                     const Eigen::VectorXd& logits, const CourtGrid& grid, Rng& rng);

struct SynthConfig {
    int players = 60;
    int rank = 4;
    int min_shots = 100;  // budgets uniform on [min_shots, max_shots], mean 233
    int max_shots = 366;
    CourtGrid grid{35.0, 50.0, 2.5, 2.0};
    std::uint64_t seed = 0;
    double dirichlet_alpha = 0.5;
    double logit_spread = 0.3;  // sd of beta_nk around beta_0k

    void validate() const;
};

struct SynthDataset {
    std::vector<ShotEvent> shots;
    PlantedTruth truth;
};

SynthDataset generate_dataset(const SynthConfig& config, int threads = 1);

// shots.csv, truth_B.csv, truth_W.csv, truth_beta.csv and synth_manifest.json.
void write_dataset(const std::string& dir, const SynthDataset& data, const SynthConfig& config);

}  // namespace shotfactor
