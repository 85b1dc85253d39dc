#pragma once

// Discretized log-Gaussian Cox process fits via elliptical slice sampling.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"
#include "shotfactor/court.hpp"
#include "shotfactor/kernel.hpp"

namespace shotfactor {

struct IntensitySurface {
    Eigen::VectorXd values;  // one rate per tile
    CourtGrid grid;
    bool normalized = false;

    double volume() const { return values.sum() * grid.tile_area(); }
};

// sum_v X_v log(dA lambda_v) - dA lambda_v - log(X_v!), lambda = exp(z + z0).
double poisson_loglik(std::span<const std::int64_t> counts, const Eigen::VectorXd& field, double offset,
                      double tile_area);

// Elliptical slice sampling. draw_prior must return a draw from the
// zero-mean Gaussian prior the target is written against.
using PriorDraw = std::function<Eigen::VectorXd(Rng&)>;
using LogLikelihood = std::function<double(const Eigen::VectorXd&)>;

struct EssResult {
    Eigen::VectorXd state;
    double loglik = 0.0;
    double threshold = 0.0;  // log slice height the state had to beat
    int evaluations = 0;     // likelihood calls, including the accepted one
};

// One update from `current` (whose log-likelihood is `current_loglik`, which
// must be finite). Non-finite proposals count as rejections.
EssResult ess_step(const Eigen::VectorXd& current, double current_loglik, const PriorDraw& draw_prior,
                   const LogLikelihood& loglik, Rng& rng);
EssResult ess_step(const Eigen::VectorXd& current, double current_loglik, const CovFactor& prior,
                   const LogLikelihood& loglik, Rng& rng);

struct LgcpConfig {
    std::optional<double> offset;  // explicit z0; empty selects log(M / (V dA))
    int burn_in = 500;
    int samples = 500;
    int thin = 2;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LgcpFit {
    IntensitySurface mean;     // posterior mean of exp(z + z0)
    Eigen::VectorXd variance;  // per-tile posterior variance of the intensity
    double offset = 0.0;
    double mean_evaluations = 0.0;  // likelihood calls per ESS step
};

double empirical_offset(std::int64_t total, const CourtGrid& grid);

LgcpFit fit_lgcp(std::span<const std::int64_t> counts, const CourtGrid& grid, const CovFactor& prior,
                 const LgcpConfig& config);

struct NormalizedSurface {
    IntensitySurface surface;
    double volume = 0.0;  // sum lambda dA before scaling
};

NormalizedSurface normalize_unit_volume(const IntensitySurface& surface);

// Independent fits for every row of `counts`. Player n samples with seed
// derive_seed(config.seed, stream::kLgcp, n).
struct LgcpBatch {
    std::vector<std::string> players;
    CourtGrid grid;
    Eigen::MatrixXd surfaces;   // unit-volume rows
    Eigen::VectorXd volumes;    // pre-normalization volumes
    Eigen::MatrixXd variances;  // posterior variance of the raw intensity
};

LgcpBatch fit_lgcp_all(const CountMatrix& counts, const CovFactor& prior, const LgcpConfig& config, int threads);

}  // namespace shotfactor
