#pragma once

// Non-negative matrix factorization of stacked surfaces, plus a PCA baseline.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"

namespace shotfactor {

enum class NmfLoss { kKl, kFrobenius };

std::string_view loss_name(NmfLoss loss);
NmfLoss parse_loss(std::string_view name);

// sum_ij (X_ij - Y_ij)^2
double frobenius_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// sum_ij X_ij log(X_ij / Y_ij) - X_ij + Y_ij with 0 log 0 = 0. Returns +inf
// when some X_ij > 0 meets Y_ij == 0.
double kl_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

double nmf_loss(NmfLoss loss, const Eigen::MatrixXd& data, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b);

inline constexpr double kNmfFloor = 1e-12;

// Lee-Seung multiplicative updates, W first, then B against the new W.
// Updated factor entries are floored at eps (eps = 0 disables every guard).
void nmf_step_frobenius(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data,
                        double eps = kNmfFloor);
void nmf_step_kl(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data, double eps = kNmfFloor);

struct NmfConfig {
    NmfLoss loss = NmfLoss::kKl;
    int max_iters = 2000;
    double tolerance = 1e-6;  // relative loss change
    int restarts = 5;
    std::uint64_t seed = 0;
    double eps = kNmfFloor;
    double jitter = 0.0;  // added to every input entry before fitting
    int threads = 1;
};

struct FactorModel {
    Eigen::MatrixXd w;  // N x K
    Eigen::MatrixXd b;  // K x V
    NmfLoss loss = NmfLoss::kKl;
    double final_loss = 0.0;  // +inf signals a diverged fit
    int iterations = 0;
    int restart = 0;  // index of the selected restart
    bool converged = false;
    std::vector<double> trace;  // loss before any update, then after each

    int rank() const { return static_cast<int>(b.rows()); }
    bool diverged() const { return !std::isfinite(final_loss); }
};

// Uniform(0.1, 1) entries scaled so sum(WB) matches sum(data).
void nmf_initialize(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data, int k, Rng& rng);

// Single run from the given starting factors.
FactorModel nmf_run(const Eigen::MatrixXd& data, Eigen::MatrixXd w, Eigen::MatrixXd b, const NmfConfig& config);

// Best of config.restarts runs; restart r seeds with derive_seed(seed, kNmf, r).
FactorModel fit_nmf(const Eigen::MatrixXd& data, int k, const NmfConfig& config);

// sum_k W_nk B_k,:
Eigen::VectorXd reconstruct(const FactorModel& model, int player);

struct PcaModel {
    Eigen::RowVectorXd mean;
    Eigen::MatrixXd scores;      // N x K
    Eigen::MatrixXd components;  // K x V, orthonormal rows
    Eigen::VectorXd explained_variance;
    double total_variance = 0.0;

    Eigen::MatrixXd reconstruction() const;
};

// Components are the top-K right singular vectors of the centered data, each
// signed so its largest-magnitude entry is positive.
PcaModel fit_pca(const Eigen::MatrixXd& data, int k);

}  // namespace shotfactor
