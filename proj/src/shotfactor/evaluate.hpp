#pragma once

// Held-out predictive comparison, empirical correlation and basis recovery.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/court.hpp"
#include "shotfactor/nmf.hpp"

namespace shotfactor {

inline constexpr double kRateFloor = 1e-12;

// Poisson log-likelihood of held-out counts under the unit-volume surface
// rescaled to the expected held-out mass train_volume * f / (1 - f).
double heldout_loglik(std::span<const std::int64_t> test_counts, const Eigen::VectorXd& unit_surface,
                      double train_volume, double fraction, double tile_area);

// Rows scaled so sum_v row_v dA = 1; entries clamped at floor first.
Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& surfaces, double tile_area, double floor = 0.0);

struct CorrelationResult {
    Eigen::VectorXd correlation;    // length V, in [-1, 1]
    std::vector<bool> constant;     // tile column (or the anchor) is constant
};

// Pearson correlation across players between the anchor column and every column.
CorrelationResult empirical_correlation(const CountMatrix& counts, int anchor);

struct RecoveryScore {
    double mean_similarity = 0.0;
    std::vector<double> similarity;  // per true basis
    std::vector<int> assignment;     // estimated row matched to each true basis
};

// Greedy maximum-cosine matching of estimated to true bases without replacement.
RecoveryScore basis_recovery_score(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth);

enum class ModelKind { kIndependentLgcp, kNmfKl, kNmfFrobenius, kRawCountNmf, kPca };

std::string_view model_name(ModelKind model);
ModelKind parse_model(std::string_view name);

struct ComparisonInput {
    CountMatrix train;
    CountMatrix test;                 // same players and grid as train
    Eigen::MatrixXd lgcp_surfaces;    // unit-volume rows fit on train
    double holdout_fraction = 0.1;
};

struct ComparisonConfig {
    std::vector<int> ranks{1, 2, 4, 6, 8, 12};
    std::vector<ModelKind> models{ModelKind::kIndependentLgcp, ModelKind::kNmfKl, ModelKind::kNmfFrobenius,
                                  ModelKind::kRawCountNmf, ModelKind::kPca};
    NmfConfig nmf;               // loss is overridden per model
    double count_jitter = 1e-8;  // added to raw counts before NMF
};

struct EvalRow {
    ModelKind model = ModelKind::kIndependentLgcp;
    int rank = 0;
    double mean = 0.0;
    double std_error = 0.0;
    Eigen::VectorXd per_player;
};

struct EvalReport {
    std::vector<std::string> players;
    double holdout_fraction = 0.1;
    std::vector<EvalRow> rows;
    std::optional<RecoveryScore> recovery;  // NMF-KL at the planted rank, when truth is known

    const EvalRow* find(ModelKind model, int rank) const;
};

// Summary of a row's per-player values.
EvalRow summarize(ModelKind model, int rank, Eigen::VectorXd per_player);

// Independent-LGCP rows repeat at every rank so the report is rectangular.
EvalReport run_comparison(const ComparisonInput& input, const ComparisonConfig& config);

// eval_report.csv (model,k,mean,std_error,per_player_file), eval_players.csv
// and eval_summary.txt under dir.
void write_eval_report(const std::string& dir, const EvalReport& report);

}  // namespace shotfactor
