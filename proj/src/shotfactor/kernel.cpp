#include "shotfactor/kernel.hpp"

#include <cmath>

#include "shotfactor/io.hpp"

namespace shotfactor {

void KernelHyper::validate() const {
    if (!(variance > 0.0) || !(length_scale > 0.0) || !std::isfinite(variance) || !std::isfinite(length_scale)) {
        throw Error(ErrorCode::kInvalidArgument, "kernel variance and length scale must be positive");
    }
}

double sq_exp_cov(Point a, Point b, const KernelHyper& hyper) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return hyper.variance * std::exp(-0.5 * (dx * dx + dy * dy) / (hyper.length_scale * hyper.length_scale));
}

Eigen::MatrixXd covariance_matrix(const CourtGrid& grid, const KernelHyper& hyper) {
    hyper.validate();
    const int v = grid.size();
    Eigen::MatrixXd cov(v, v);
    for (int i = 0; i < v; ++i) {
        const Point ci = grid.center(i);
        cov(i, i) = hyper.variance;
        for (int j = 0; j < i; ++j) {
            const double k = sq_exp_cov(ci, grid.center(j), hyper);
            cov(i, j) = k;
            cov(j, i) = k;
        }
    }
    return cov;
}

CovFactor factorize_covariance(const Eigen::MatrixXd& cov, double jitter) {
    double tried = jitter;
    for (int attempt = 0; attempt <= kJitterRetries; ++attempt) {
        Eigen::MatrixXd shifted = cov;
        shifted.diagonal().array() += tried;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        if (llt.info() == Eigen::Success && (llt.matrixL().toDenseMatrix().diagonal().array() > 0.0).all()) {
            return CovFactor(llt.matrixL().toDenseMatrix(), tried);
        }
        if (attempt < kJitterRetries) tried *= 10.0;
    }
    throw Error(ErrorCode::kNumeric,
                "covariance is not positive definite even with jitter " + io::format_double(tried));
}

CovFactor build_cov_factor(const CourtGrid& grid, const KernelHyper& hyper, double jitter) {
    hyper.validate();
    if (jitter <= 0.0) jitter = kDefaultRelativeJitter * hyper.variance;
    return factorize_covariance(covariance_matrix(grid, hyper), jitter);
}

Eigen::VectorXd standard_normal(int n, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd eps(n);
    for (int i = 0; i < n; ++i) eps[i] = normal(rng);
    return eps;
}

Eigen::VectorXd CovFactor::sample(Rng& rng) const {
    return lower_.triangularView<Eigen::Lower>() * standard_normal(dim(), rng);
}

}  // namespace shotfactor
