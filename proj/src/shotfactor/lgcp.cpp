#include "shotfactor/lgcp.hpp"

#include <cmath>
#include <numbers>

namespace shotfactor {

double poisson_loglik(std::span<const std::int64_t> counts, const Eigen::VectorXd& field, double offset,
                      double tile_area) {
    const double log_area = std::log(tile_area);
    double ll = 0.0;
    for (std::size_t v = 0; v < counts.size(); ++v) {
        const double eta = field[static_cast<Eigen::Index>(v)] + offset;
        const auto x = static_cast<double>(counts[v]);
        ll -= tile_area * std::exp(eta);
        if (counts[v] > 0) ll += x * (log_area + eta) - std::lgamma(x + 1.0);
    }
    return ll;
}

EssResult ess_step(const Eigen::VectorXd& current, double current_loglik, const PriorDraw& draw_prior,
                   const LogLikelihood& loglik, Rng& rng) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    // The bracket collapses onto the current state long before this.
    constexpr int kMaxShrinks = 200;

    const Eigen::VectorXd nu = draw_prior(rng);
    const double threshold = current_loglik + std::log(uniform_open(rng));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double theta = kTwoPi * unif(rng);
    double lo = theta - kTwoPi;
    double hi = theta;

    EssResult out;
    out.threshold = threshold;
    for (int shrink = 0; shrink < kMaxShrinks; ++shrink) {
        Eigen::VectorXd proposal = current * std::cos(theta) + nu * std::sin(theta);
        const double ll = loglik(proposal);
        ++out.evaluations;
        if (std::isfinite(ll) && ll > threshold) {
            out.state = std::move(proposal);
            out.loglik = ll;
            return out;
        }
        if (theta < 0.0) {
            lo = theta;
        } else {
            hi = theta;
        }
        theta = lo + (hi - lo) * unif(rng);
    }
    out.state = current;
    out.loglik = current_loglik;
    return out;
}

EssResult ess_step(const Eigen::VectorXd& current, double current_loglik, const CovFactor& prior,
                   const LogLikelihood& loglik, Rng& rng) {
    return ess_step(
        current, current_loglik, [&prior](Rng& r) { return prior.sample(r); }, loglik, rng);
}

void LgcpConfig::validate() const {
    if (burn_in < 0) throw Error(ErrorCode::kInvalidArgument, "burn-in must be non-negative");
    if (samples < 1) throw Error(ErrorCode::kInvalidArgument, "at least one kept sample is required");
    if (thin < 1) throw Error(ErrorCode::kInvalidArgument, "thinning interval must be at least 1");
    if (offset && !std::isfinite(*offset)) throw Error(ErrorCode::kInvalidArgument, "explicit z0 must be finite");
}

double empirical_offset(std::int64_t total, const CourtGrid& grid) {
    return std::log(static_cast<double>(total) / (grid.size() * grid.tile_area()));
}

LgcpFit fit_lgcp(std::span<const std::int64_t> counts, const CourtGrid& grid, const CovFactor& prior,
                 const LgcpConfig& config) {
    config.validate();
    const int v = grid.size();
    if (static_cast<int>(counts.size()) != v || prior.dim() != v) {
        throw Error(ErrorCode::kInvalidArgument, "count vector, grid and prior dimensions disagree");
    }
    std::int64_t total = 0;
    for (auto c : counts) total += c;

    double offset = 0.0;
    if (config.offset) {
        offset = *config.offset;
    } else if (total > 0) {
        offset = empirical_offset(total, grid);
    } else {
        throw Error(ErrorCode::kInvalidArgument, "no shots to set the empirical z0 from; supply an explicit z0");
    }

    // Terms that do not depend on the field are dropped from the sampler's target.
    const double area = grid.tile_area();
    Eigen::VectorXd x(v);
    for (int i = 0; i < v; ++i) x[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]);
    const double scale = area * std::exp(offset);
    LogLikelihood loglik = [&x, scale](const Eigen::VectorXd& z) {
        return x.dot(z) - scale * z.array().exp().sum();
    };

    Rng rng(config.seed);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(v);
    double ll = loglik(z);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(v);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(v);
    long evaluations = 0;
    const long steps = config.burn_in + static_cast<long>(config.samples) * config.thin;
    int kept = 0;
    for (long step = 1; step <= steps; ++step) {
        auto res = ess_step(z, ll, prior, loglik, rng);
        z = std::move(res.state);
        ll = res.loglik;
        evaluations += res.evaluations;
        if (step > config.burn_in && (step - config.burn_in) % config.thin == 0) {
            const Eigen::ArrayXd lambda = (z.array() + offset).exp();
            sum.array() += lambda;
            sum_sq.array() += lambda.square();
            ++kept;
        }
    }

    LgcpFit fit;
    fit.offset = offset;
    fit.mean = IntensitySurface{sum / kept, grid, false};
    fit.variance = (sum_sq / kept).array() - fit.mean.values.array().square();
    fit.variance = fit.variance.cwiseMax(0.0);
    fit.mean_evaluations = static_cast<double>(evaluations) / static_cast<double>(steps);
    return fit;
}

NormalizedSurface normalize_unit_volume(const IntensitySurface& surface) {
    const double volume = surface.volume();
    if (!(volume > 0.0) || !std::isfinite(volume)) {
        throw Error(ErrorCode::kNumeric, "cannot normalize a surface with zero or non-finite volume");
    }
    NormalizedSurface out{surface, volume};
    out.surface.values /= volume;
    out.surface.normalized = true;
    return out;
}

LgcpBatch fit_lgcp_all(const CountMatrix& counts, const CovFactor& prior, const LgcpConfig& config, int threads) {
    const int n = counts.num_players();
    const int v = counts.grid.size();
    LgcpBatch batch{counts.players, counts.grid, Eigen::MatrixXd(n, v), Eigen::VectorXd(n), Eigen::MatrixXd(n, v)};
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        LgcpConfig player_config = config;
        player_config.seed = derive_seed(config.seed, stream::kLgcp, i);
        std::span<const std::int64_t> row_counts(counts.counts.row(row).data(), static_cast<std::size_t>(v));
        const auto fit = fit_lgcp(row_counts, counts.grid, prior, player_config);
        const auto norm = normalize_unit_volume(fit.mean);
        batch.surfaces.row(row) = norm.surface.values.transpose();
        batch.volumes[row] = norm.volume;
        batch.variances.row(row) = fit.variance.transpose();
    });
    return batch;
}

}  // namespace shotfactor
