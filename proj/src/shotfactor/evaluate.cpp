#include "shotfactor/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "shotfactor/io.hpp"
#include "shotfactor/synth.hpp"

namespace shotfactor {

double heldout_loglik(std::span<const std::int64_t> test_counts, const Eigen::VectorXd& unit_surface,
                      double train_volume, double fraction, double tile_area) {
    if (static_cast<Eigen::Index>(test_counts.size()) != unit_surface.size()) {
        throw Error(ErrorCode::kInvalidArgument, "test counts and surface differ in length");
    }
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "holdout fraction must lie strictly between 0 and 1");
    }
    const double scale = train_volume * fraction / (1.0 - fraction);
    double ll = 0.0;
    for (std::size_t v = 0; v < test_counts.size(); ++v) {
        const double rate = std::max(unit_surface[static_cast<Eigen::Index>(v)] * scale, kRateFloor);
        const double mean = tile_area * rate;
        const auto x = static_cast<double>(test_counts[v]);
        ll -= mean;
        if (test_counts[v] > 0) ll += x * std::log(mean) - std::lgamma(x + 1.0);
    }
    return ll;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& surfaces, double tile_area, double floor) {
    Eigen::MatrixXd out = floor > 0.0 ? Eigen::MatrixXd(surfaces.cwiseMax(floor)) : surfaces;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        const double volume = out.row(r).sum() * tile_area;
        if (!(volume > 0.0)) throw Error(ErrorCode::kNumeric, "surface row " + std::to_string(r) + " has no mass");
        out.row(r) /= volume;
    }
    return out;
}

CorrelationResult empirical_correlation(const CountMatrix& counts, int anchor) {
    const auto n = counts.counts.rows();
    const auto v = counts.counts.cols();
    if (anchor < 0 || anchor >= v) throw Error(ErrorCode::kInvalidArgument, "anchor tile out of range");
    if (n < 3) throw Error(ErrorCode::kInvalidArgument, "correlation needs at least three players");
    const Eigen::MatrixXd x = counts.as_real();
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::VectorXd norms = centered.colwise().norm().transpose();
    CorrelationResult out{Eigen::VectorXd::Zero(v), std::vector<bool>(static_cast<std::size_t>(v), false)};
    const bool anchor_constant = !(norms[anchor] > 0.0);
    for (Eigen::Index u = 0; u < v; ++u) {
        if (anchor_constant || !(norms[u] > 0.0)) {
            out.constant[static_cast<std::size_t>(u)] = true;
            continue;
        }
        const double r = centered.col(anchor).dot(centered.col(u)) / (norms[anchor] * norms[u]);
        out.correlation[u] = std::clamp(r, -1.0, 1.0);
    }
    return out;
}

RecoveryScore basis_recovery_score(const Eigen::MatrixXd& estimated, const Eigen::MatrixXd& truth) {
    if (estimated.cols() != truth.cols()) throw Error(ErrorCode::kInvalidArgument, "bases differ in tile count");
    if (estimated.rows() < truth.rows()) {
        throw Error(ErrorCode::kInvalidArgument, "fewer estimated bases than true bases");
    }
    const auto k_est = estimated.rows();
    const auto k_true = truth.rows();
    Eigen::MatrixXd sim(k_est, k_true);
    for (Eigen::Index i = 0; i < k_est; ++i)
        for (Eigen::Index j = 0; j < k_true; ++j)
            sim(i, j) = cosine_similarity(estimated.row(i).transpose(), truth.row(j).transpose());

    RecoveryScore score;
    score.similarity.assign(static_cast<std::size_t>(k_true), 0.0);
    score.assignment.assign(static_cast<std::size_t>(k_true), -1);
    std::vector<bool> used(static_cast<std::size_t>(k_est), false);
    for (Eigen::Index round = 0; round < k_true; ++round) {
        double best = -std::numeric_limits<double>::infinity();
        Eigen::Index bi = -1, bj = -1;
        for (Eigen::Index i = 0; i < k_est; ++i) {
            if (used[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = 0; j < k_true; ++j) {
                if (score.assignment[static_cast<std::size_t>(j)] >= 0) continue;
                if (sim(i, j) > best) {
                    best = sim(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        used[static_cast<std::size_t>(bi)] = true;
        score.assignment[static_cast<std::size_t>(bj)] = static_cast<int>(bi);
        score.similarity[static_cast<std::size_t>(bj)] = best;
    }
    double total = 0.0;
    for (double s : score.similarity) total += s;
    score.mean_similarity = total / static_cast<double>(k_true);
    return score;
}

std::string_view model_name(ModelKind model) {
    switch (model) {
        case ModelKind::kIndependentLgcp: return "lgcp";
        case ModelKind::kNmfKl: return "nmf_kl";
        case ModelKind::kNmfFrobenius: return "nmf_frobenius";
        case ModelKind::kRawCountNmf: return "nmf_counts";
        case ModelKind::kPca: return "pca";
    }
    return "unknown";
}

ModelKind parse_model(std::string_view name) {
    for (auto m : {ModelKind::kIndependentLgcp, ModelKind::kNmfKl, ModelKind::kNmfFrobenius, ModelKind::kRawCountNmf,
                   ModelKind::kPca}) {
        if (model_name(m) == name) return m;
    }
    throw Error(ErrorCode::kInvalidArgument, "unknown model '" + std::string(name) + "'");
}

const EvalRow* EvalReport::find(ModelKind model, int rank) const {
    for (const auto& row : rows)
        if (row.model == model && row.rank == rank) return &row;
    return nullptr;
}

EvalRow summarize(ModelKind model, int rank, Eigen::VectorXd per_player) {
    EvalRow row;
    row.model = model;
    row.rank = rank;
    const auto n = per_player.size();
    row.mean = per_player.mean();
    if (n > 1) {
        const double var = (per_player.array() - row.mean).square().sum() / static_cast<double>(n - 1);
        row.std_error = std::sqrt(var / static_cast<double>(n));
    }
    row.per_player = std::move(per_player);
    return row;
}

namespace {

Eigen::VectorXd score_surfaces(const ComparisonInput& input, const Eigen::MatrixXd& unit_surfaces) {
    const auto& test = input.test;
    const int v = test.grid.size();
    Eigen::VectorXd out(test.num_players());
    for (int n = 0; n < test.num_players(); ++n) {
        std::span<const std::int64_t> counts(test.counts.row(n).data(), static_cast<std::size_t>(v));
        const auto train_volume = static_cast<double>(input.train.row_total(n));
        out[n] = heldout_loglik(counts, unit_surfaces.row(n).transpose(), train_volume, input.holdout_fraction,
                                test.grid.tile_area());
    }
    return out;
}

}  // namespace

EvalReport run_comparison(const ComparisonInput& input, const ComparisonConfig& config) {
    const auto& grid = input.train.grid;
    if (!(input.test.grid == grid) || input.test.players != input.train.players) {
        throw Error(ErrorCode::kInvalidArgument, "train and test matrices must share players and grid");
    }
    if (input.lgcp_surfaces.rows() != input.train.num_players() || input.lgcp_surfaces.cols() != grid.size()) {
        throw Error(ErrorCode::kInvalidArgument, "LGCP surfaces do not match the train matrix");
    }
    EvalReport report;
    report.players = input.train.players;
    report.holdout_fraction = input.holdout_fraction;

    std::optional<Eigen::VectorXd> lgcp_scores;
    for (int k : config.ranks) {
        for (auto model : config.models) {
            Eigen::VectorXd scores;
            switch (model) {
                case ModelKind::kIndependentLgcp:
                    if (!lgcp_scores) lgcp_scores = score_surfaces(input, input.lgcp_surfaces);
                    scores = *lgcp_scores;
                    break;
                case ModelKind::kNmfKl:
                case ModelKind::kNmfFrobenius: {
                    NmfConfig nmf = config.nmf;
                    nmf.loss = model == ModelKind::kNmfKl ? NmfLoss::kKl : NmfLoss::kFrobenius;
                    const auto fit = fit_nmf(input.lgcp_surfaces, k, nmf);
                    scores = score_surfaces(input, normalize_rows(fit.w * fit.b, grid.tile_area(), kRateFloor));
                    break;
                }
                case ModelKind::kRawCountNmf: {
                    NmfConfig nmf = config.nmf;
                    nmf.loss = NmfLoss::kKl;
                    nmf.jitter = config.count_jitter;
                    const auto fit = fit_nmf(input.train.as_real(), k, nmf);
                    scores = score_surfaces(input, normalize_rows(fit.w * fit.b, grid.tile_area(), kRateFloor));
                    break;
                }
                case ModelKind::kPca: {
                    if (k > input.train.num_players() - 1) continue;
                    const auto pca = fit_pca(input.lgcp_surfaces, k);
                    scores = score_surfaces(input, normalize_rows(pca.reconstruction(), grid.tile_area(), kRateFloor));
                    break;
                }
            }
            report.rows.push_back(summarize(model, k, std::move(scores)));
        }
    }
    return report;
}

void write_eval_report(const std::string& dir, const EvalReport& report) {
    io::ensure_directory(dir);
    std::string csv = "model,k,mean,std_error,per_player_file\n";
    for (const auto& row : report.rows) {
        csv += std::string(model_name(row.model)) + "," + std::to_string(row.rank) + "," + io::format_double(row.mean) +
               "," + io::format_double(row.std_error) + ",eval_players.csv\n";
    }
    io::write_text(dir + "/eval_report.csv", csv);

    std::string players = "player";
    for (const auto& row : report.rows) players += "," + std::string(model_name(row.model)) + "_k" + std::to_string(row.rank);
    players += "\n";
    for (std::size_t n = 0; n < report.players.size(); ++n) {
        players += report.players[n];
        for (const auto& row : report.rows) players += "," + io::format_double(row.per_player[static_cast<Eigen::Index>(n)]);
        players += "\n";
    }
    io::write_text(dir + "/eval_players.csv", players);

    std::string summary = "held-out log-likelihood per player (holdout fraction " +
                          io::format_double(report.holdout_fraction) + ", " + std::to_string(report.players.size()) +
                          " players)\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %4s %14s %10s\n", "model", "k", "mean", "std_err");
    summary += line;
    for (const auto& row : report.rows) {
        std::snprintf(line, sizeof(line), "%-14s %4d %14.4f %10.4f\n", std::string(model_name(row.model)).c_str(),
                      row.rank, row.mean, row.std_error);
        summary += line;
    }
    if (report.recovery) {
        summary += "basis recovery (nmf_kl vs planted): mean cosine " +
                   io::format_double(report.recovery->mean_similarity) + "\n";
    }
    io::write_text(dir + "/eval_summary.txt", summary);
}

}  // namespace shotfactor
