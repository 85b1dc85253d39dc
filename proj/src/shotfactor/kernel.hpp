#pragma once

// Squared-exponential Gaussian-process prior over tile centers.

#include <span>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"
#include "shotfactor/court.hpp"

namespace shotfactor {

struct KernelHyper {
    double variance = 1.0;      // marginal variance sigma^2
    double length_scale = 5.0;  // feet

    void validate() const;
};

// sigma^2 * exp(-|a - b|^2 / (2 phi^2))
double sq_exp_cov(Point a, Point b, const KernelHyper& hyper);

// Dense covariance over tile centers.
Eigen::MatrixXd covariance_matrix(const CourtGrid& grid, const KernelHyper& hyper);

// Lower Cholesky factor of K + jitter * I. Immutable once built.
class CovFactor {
public:
    CovFactor(Eigen::MatrixXd lower, double jitter) : lower_(std::move(lower)), jitter_(jitter) {}

    int dim() const { return static_cast<int>(lower_.rows()); }
    double jitter() const { return jitter_; }
    const Eigen::MatrixXd& lower() const { return lower_; }

    // L * eps with eps iid standard normal.
    Eigen::VectorXd sample(Rng& rng) const;

private:
    Eigen::MatrixXd lower_;
    double jitter_;
};

inline constexpr double kDefaultRelativeJitter = 1e-6;
inline constexpr int kJitterRetries = 3;

// Factorizes K + jitter*I, multiplying jitter by 10 on failure up to three
// times. jitter <= 0 selects 1e-6 * sigma^2.
CovFactor build_cov_factor(const CourtGrid& grid, const KernelHyper& hyper, double jitter = 0.0);
CovFactor factorize_covariance(const Eigen::MatrixXd& cov, double jitter);

// Standard-normal vector of length n.
Eigen::VectorXd standard_normal(int n, Rng& rng);

}  // namespace shotfactor
