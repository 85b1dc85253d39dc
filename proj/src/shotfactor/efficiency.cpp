#include "shotfactor/efficiency.hpp"

#include <cmath>
#include <unordered_map>

#include "shotfactor/lgcp.hpp"

namespace shotfactor {

AdjustedLoadings adjust_weights(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
    if (w.cols() != b.rows()) throw Error(ErrorCode::kInvalidArgument, "W columns must match B rows");
    if ((w.array() < 0.0).any() || (b.array() < 0.0).any()) {
        throw Error(ErrorCode::kInvalidArgument, "factor model has negative entries");
    }
    AdjustedLoadings out;
    for (Eigen::Index k = 0; k < b.rows(); ++k) {
        if (b.row(k).sum() > 0.0) {
            out.kept.push_back(static_cast<int>(k));
        } else {
            out.warnings.push_back("basis " + std::to_string(k) + " has zero mass and was dropped");
        }
    }
    if (out.kept.empty()) throw Error(ErrorCode::kInvalidArgument, "every basis has zero mass");
    const auto k_kept = static_cast<Eigen::Index>(out.kept.size());
    out.weights.resize(w.rows(), k_kept);
    out.bases.resize(k_kept, b.cols());
    for (Eigen::Index j = 0; j < k_kept; ++j) {
        const auto k = out.kept[static_cast<std::size_t>(j)];
        const double mass = b.row(k).sum();
        out.weights.col(j) = w.col(k) * mass;
        out.bases.row(j) = b.row(k) / mass;
    }
    return out;
}

TypePosterior shot_type_posterior(int tile, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases) {
    const auto k = bases.rows();
    if (weights.size() != k) throw Error(ErrorCode::kInvalidArgument, "weight length must match basis count");
    if (tile < 0 || tile >= bases.cols()) throw Error(ErrorCode::kInvalidArgument, "tile out of range");
    TypePosterior out;
    out.probs = weights.cwiseProduct(bases.col(tile));
    const double total = out.probs.sum();
    if (!(total > 0.0) || !std::isfinite(total)) {
        out.probs = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
        out.degenerate = true;
    } else {
        out.probs /= total;
    }
    return out;
}

double predict_fg_pct(int tile, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                      const Eigen::VectorXd& logits) {
    const auto post = shot_type_posterior(tile, weights, bases);
    if (logits.size() != post.probs.size()) throw Error(ErrorCode::kInvalidArgument, "logit length mismatch");
    double p = 0.0;
    for (Eigen::Index k = 0; k < logits.size(); ++k) p += inv_logit(logits[k]) * post.probs[k];
    return p;
}

double gibbs_sigma_update(std::span<const double> logits, double global_mean, double shape, double rate, Rng& rng) {
    if (logits.empty()) throw Error(ErrorCode::kInvalidArgument, "variance update needs at least one player");
    double ss = 0.0;
    for (double beta : logits) ss += (beta - global_mean) * (beta - global_mean);
    const double post_shape = shape + 0.5 * static_cast<double>(logits.size());
    const double post_rate = rate + 0.5 * ss;
    std::gamma_distribution<double> gamma(post_shape, 1.0 / post_rate);
    double g = gamma(rng);
    while (!(g > 0.0)) g = gamma(rng);
    return 1.0 / g;
}

EfficiencyData make_efficiency_data(std::span<const ShotEvent> shots, std::span<const std::string> players,
                                    const CourtGrid& grid) {
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = 0; i < players.size(); ++i) row_of.emplace(players[i], static_cast<int>(i));
    EfficiencyData data;
    data.num_players = static_cast<int>(players.size());
    for (const auto& s : shots) {
        auto it = row_of.find(s.player);
        if (it == row_of.end()) continue;
        data.player.push_back(it->second);
        data.tile.push_back(grid.tile_index(s.x, s.y));
        data.made.push_back(s.made ? 1 : 0);
    }
    return data;
}

namespace {

int draw_index(const Eigen::VectorXd& weights, Rng& rng) {
    const double total = weights.sum();
    double u = uniform_open(rng) * total;
    for (Eigen::Index k = 0; k < weights.size(); ++k) {
        u -= weights[k];
        if (u < 0.0) return static_cast<int>(k);
    }
    // Round-off left u marginally positive; take the last positive entry.
    for (auto k = weights.size() - 1; k > 0; --k)
        if (weights[k] > 0.0) return static_cast<int>(k);
    return 0;
}

Eigen::VectorXd type_weights(const EfficiencyData& data, std::size_t i, const AdjustedLoadings& loadings,
                             const Eigen::MatrixXd* logits) {
    const int n = data.player[i];
    Eigen::VectorXd p = shot_type_posterior(data.tile[i], loadings.weights.row(n).transpose(), loadings.bases).probs;
    if (logits) {
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            const double beta = (*logits)(n, k);
            p[k] *= std::exp(data.made[i] ? log_inv_logit(beta) : log1m_inv_logit(beta));
        }
        if (!(p.sum() > 0.0)) p.setConstant(1.0);
    }
    return p;
}

void check_data(const EfficiencyData& data, const AdjustedLoadings& loadings) {
    if (data.num_players != loadings.weights.rows()) {
        throw Error(ErrorCode::kInvalidArgument, "shot data and loadings cover different player sets");
    }
}

}  // namespace

std::vector<int> sample_shot_types(const EfficiencyData& data, const AdjustedLoadings& loadings, Rng& rng,
                                   const Eigen::MatrixXd* logits) {
    check_data(data, loadings);
    std::vector<int> types(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) types[i] = draw_index(type_weights(data, i, loadings, logits), rng);
    return types;
}

TypeTallies tally_types(const EfficiencyData& data, std::span<const int> types, int rank) {
    TypeTallies t{Eigen::MatrixXd::Zero(data.num_players, rank), Eigen::MatrixXd::Zero(data.num_players, rank)};
    for (std::size_t i = 0; i < data.size(); ++i) {
        t.attempts(data.player[i], types[i]) += 1.0;
        if (data.made[i]) t.makes(data.player[i], types[i]) += 1.0;
    }
    return t;
}

double player_loglik(const Eigen::VectorXd& logits, const TypeTallies& tallies, int player) {
    double ll = 0.0;
    for (Eigen::Index k = 0; k < logits.size(); ++k) {
        const double made = tallies.makes(player, k);
        const double missed = tallies.attempts(player, k) - made;
        if (made > 0.0) ll += made * log_inv_logit(logits[k]);
        if (missed > 0.0) ll += missed * log1m_inv_logit(logits[k]);
    }
    return ll;
}

void gibbs_beta_step(EfficiencyState& state, const TypeTallies& tallies, const EfficiencyPriors& priors,
                     std::uint64_t seed, int threads) {
    const auto n_players = state.logits.rows();
    const auto rank = state.logits.cols();
    if ((state.variance.array() <= 0.0).any()) {
        throw Error(ErrorCode::kInvalidArgument, "basis variances must be positive");
    }
    const Eigen::VectorXd sd = state.variance.cwiseSqrt();
    const Eigen::VectorXd global = state.global;

    parallel_for(static_cast<std::size_t>(n_players), threads, [&](std::size_t i) {
        const auto n = static_cast<int>(i);
        Rng rng(derive_seed(seed, i));
        const Eigen::VectorXd deviation = state.logits.row(n).transpose() - global;
        LogLikelihood loglik = [&](const Eigen::VectorXd& dev) {
            return player_loglik(global + dev, tallies, n);
        };
        PriorDraw prior = [&sd](Rng& r) -> Eigen::VectorXd {
            return sd.cwiseProduct(standard_normal(static_cast<int>(sd.size()), r));
        };
        const auto res = ess_step(deviation, loglik(deviation), prior, loglik, rng);
        state.logits.row(n) = (global + res.state).transpose();
    });

    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(n_players)));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index k = 0; k < rank; ++k) {
        const double precision = 1.0 / priors.global_variance + static_cast<double>(n_players) / state.variance[k];
        const double mean = state.logits.col(k).sum() / state.variance[k] / precision;
        state.global[k] = mean + normal(rng) / std::sqrt(precision);
    }
}

EfficiencyFit fit_efficiency(const EfficiencyData& data, const AdjustedLoadings& loadings,
                             const EfficiencyConfig& config) {
    if (data.size() == 0) throw Error(ErrorCode::kInvalidArgument, "no shots to fit the efficiency model on");
    check_data(data, loadings);
    if (config.sweeps < 1 || config.burn_in < 0 || config.burn_in >= config.sweeps) {
        throw Error(ErrorCode::kInvalidArgument, "need 0 <= burn-in < sweeps");
    }
    const int rank = loadings.rank();
    const int n_players = data.num_players;

    EfficiencyState state{Eigen::VectorXd::Zero(rank), Eigen::VectorXd::Ones(rank),
                          Eigen::MatrixXd::Zero(n_players, rank)};

    // Prior type probabilities never change; compute them once.
    Eigen::MatrixXd prior_types(static_cast<Eigen::Index>(data.size()), rank);
    for (std::size_t i = 0; i < data.size(); ++i) {
        prior_types.row(static_cast<Eigen::Index>(i)) = type_weights(data, i, loadings, nullptr).transpose();
    }
    std::vector<std::vector<std::size_t>> shots_of(static_cast<std::size_t>(n_players));
    for (std::size_t i = 0; i < data.size(); ++i) shots_of[static_cast<std::size_t>(data.player[i])].push_back(i);

    EfficiencyFit fit;
    fit.variance_trace.resize(config.sweeps, rank);
    fit.global_trace.resize(config.sweeps, rank);
    fit.loglik_trace.resize(config.sweeps);
    EfficiencyState sum{Eigen::VectorXd::Zero(rank), Eigen::VectorXd::Zero(rank),
                        Eigen::MatrixXd::Zero(n_players, rank)};
    Eigen::MatrixXd prob_sum = Eigen::MatrixXd::Zero(n_players, rank);
    Eigen::VectorXd global_prob_sum = Eigen::VectorXd::Zero(rank);
    Eigen::VectorXd global_sq_sum = Eigen::VectorXd::Zero(rank);
    std::vector<int> types(data.size());

    for (int sweep = 0; sweep < config.sweeps; ++sweep) {
        const auto sweep_seed = derive_seed(config.seed, stream::kEfficiency, static_cast<std::uint64_t>(sweep));

        // Types, conditionally independent across players given beta.
        parallel_for(static_cast<std::size_t>(n_players), config.threads, [&](std::size_t n) {
            Rng rng(derive_seed(sweep_seed, 0, n));
            for (auto i : shots_of[n]) {
                Eigen::VectorXd p = prior_types.row(static_cast<Eigen::Index>(i)).transpose();
                for (int k = 0; k < rank; ++k) {
                    const double beta = state.logits(static_cast<Eigen::Index>(n), k);
                    p[k] *= std::exp(data.made[i] ? log_inv_logit(beta) : log1m_inv_logit(beta));
                }
                if (!(p.sum() > 0.0)) p.setConstant(1.0);
                types[i] = draw_index(p, rng);
            }
        });
        const auto tallies = tally_types(data, types, rank);

        gibbs_beta_step(state, tallies, config.priors, derive_seed(sweep_seed, 1), config.threads);

        Rng sigma_rng(derive_seed(sweep_seed, 2));
        for (int k = 0; k < rank; ++k) {
            const Eigen::VectorXd col = state.logits.col(k);
            state.variance[k] = gibbs_sigma_update({col.data(), static_cast<std::size_t>(col.size())},
                                                   state.global[k], config.priors.shape, config.priors.rate,
                                                   sigma_rng);
        }

        double ll = 0.0;
        for (int n = 0; n < n_players; ++n) ll += player_loglik(state.logits.row(n).transpose(), tallies, n);
        fit.variance_trace.row(sweep) = state.variance.transpose();
        fit.global_trace.row(sweep) = state.global.transpose();
        fit.loglik_trace[sweep] = ll;

        if (sweep >= config.burn_in) {
            sum.global += state.global;
            sum.variance += state.variance;
            sum.logits += state.logits;
            prob_sum += state.logits.unaryExpr([](double b) { return inv_logit(b); });
            global_prob_sum += state.global.unaryExpr([](double b) { return inv_logit(b); });
            global_sq_sum += state.global.cwiseAbs2();
        }
    }
    const double kept = static_cast<double>(config.sweeps - config.burn_in);
    fit.mean = EfficiencyState{sum.global / kept, sum.variance / kept, sum.logits / kept};
    fit.mean_probability = prob_sum / kept;
    fit.mean_global_probability = global_prob_sum / kept;
    fit.global_sd = (global_sq_sum / kept - fit.mean.global.cwiseAbs2()).cwiseMax(0.0).cwiseSqrt();
    return fit;
}

Eigen::VectorXd efficiency_surface(const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                                   const Eigen::VectorXd& logits) {
    Eigen::VectorXd out(bases.cols());
    for (Eigen::Index v = 0; v < bases.cols(); ++v) out[v] = predict_fg_pct(static_cast<int>(v), weights, bases, logits);
    return out;
}

Eigen::VectorXd global_efficiency_surface(const AdjustedLoadings& loadings, const Eigen::VectorXd& global) {
    const Eigen::VectorXd mix = loadings.weights.colwise().mean().transpose();
    return efficiency_surface(mix, loadings.bases, global);
}

}  // namespace shotfactor
