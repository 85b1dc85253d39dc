#include "shotfactor/nmf.hpp"

#include <cmath>
#include <limits>

#include <Eigen/SVD>

namespace shotfactor {

namespace {

void require_same_shape(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
        throw Error(ErrorCode::kInvalidArgument, "loss arguments differ in shape (" + std::to_string(x.rows()) + "x" +
                                                     std::to_string(x.cols()) + " vs " + std::to_string(y.rows()) +
                                                     "x" + std::to_string(y.cols()) + ")");
    }
}

Eigen::MatrixXd safe_ratio(const Eigen::MatrixXd& data, const Eigen::MatrixXd& approx, double eps) {
    if (eps > 0.0) return data.cwiseQuotient(approx.cwiseMax(eps));
    return data.cwiseQuotient(approx);
}

void apply_floor(Eigen::MatrixXd& m, double eps) {
    if (eps > 0.0) m = m.cwiseMax(eps);
}

}  // namespace

std::string_view loss_name(NmfLoss loss) { return loss == NmfLoss::kKl ? "kl" : "frobenius"; }

NmfLoss parse_loss(std::string_view name) {
    if (name == "kl") return NmfLoss::kKl;
    if (name == "frobenius") return NmfLoss::kFrobenius;
    throw Error(ErrorCode::kInvalidArgument, "unknown NMF loss '" + std::string(name) + "' (expected kl or frobenius)");
}

double frobenius_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    require_same_shape(x, y);
    return (x - y).squaredNorm();
}

double kl_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    require_same_shape(x, y);
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const double a = x(i, j);
            const double b = y(i, j);
            if (a > 0.0) {
                if (!(b > 0.0)) return std::numeric_limits<double>::infinity();
                total += a * std::log(a / b) - a + b;
            } else {
                total += b - a;
            }
        }
    }
    return total;
}

double nmf_loss(NmfLoss loss, const Eigen::MatrixXd& data, const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) {
    const Eigen::MatrixXd approx = w * b;
    return loss == NmfLoss::kKl ? kl_loss(data, approx) : frobenius_loss(data, approx);
}

void nmf_step_frobenius(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data, double eps) {
    {
        const Eigen::MatrixXd numer = data * b.transpose();
        const Eigen::MatrixXd denom = (w * (b * b.transpose())).array() + eps;
        w = w.cwiseProduct(numer.cwiseQuotient(denom));
        apply_floor(w, eps);
    }
    const Eigen::MatrixXd numer = w.transpose() * data;
    const Eigen::MatrixXd denom = ((w.transpose() * w) * b).array() + eps;
    b = b.cwiseProduct(numer.cwiseQuotient(denom));
    apply_floor(b, eps);
}

void nmf_step_kl(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data, double eps) {
    {
        const Eigen::MatrixXd ratio = safe_ratio(data, w * b, eps);
        const Eigen::MatrixXd numer = ratio * b.transpose();                     // N x K
        const Eigen::RowVectorXd denom = b.rowwise().sum().transpose().array() + eps;  // per k
        w = w.cwiseProduct(numer).array().rowwise() / denom.array();
        apply_floor(w, eps);
    }
    const Eigen::MatrixXd ratio = safe_ratio(data, w * b, eps);
    const Eigen::MatrixXd numer = w.transpose() * ratio;                   // K x V
    const Eigen::VectorXd denom = w.colwise().sum().transpose().array() + eps;  // per k
    b = b.cwiseProduct(numer).array().colwise() / denom.array();
    apply_floor(b, eps);
}

void nmf_initialize(Eigen::MatrixXd& w, Eigen::MatrixXd& b, const Eigen::MatrixXd& data, int k, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.1, 1.0);
    w.resize(data.rows(), k);
    b.resize(k, data.cols());
    for (Eigen::Index j = 0; j < w.cols(); ++j)
        for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = unif(rng);
    for (Eigen::Index j = 0; j < b.cols(); ++j)
        for (Eigen::Index i = 0; i < b.rows(); ++i) b(i, j) = unif(rng);
    const double mass = (w * b).sum();
    const double target = data.sum();
    if (mass > 0.0 && target > 0.0) {
        const double s = std::sqrt(target / mass);
        w *= s;
        b *= s;
    }
}

FactorModel nmf_run(const Eigen::MatrixXd& data, Eigen::MatrixXd w, Eigen::MatrixXd b, const NmfConfig& config) {
    FactorModel model;
    model.loss = config.loss;
    double prev = nmf_loss(config.loss, data, w, b);
    model.trace.push_back(prev);
    for (int it = 1; it <= config.max_iters; ++it) {
        if (config.loss == NmfLoss::kKl) {
            nmf_step_kl(w, b, data, config.eps);
        } else {
            nmf_step_frobenius(w, b, data, config.eps);
        }
        double cur = nmf_loss(config.loss, data, w, b);
        model.iterations = it;
        if (!std::isfinite(cur) || !w.allFinite() || !b.allFinite()) {
            cur = std::numeric_limits<double>::infinity();
            model.trace.push_back(cur);
            break;
        }
        model.trace.push_back(cur);
        const double scale = std::max(std::abs(prev), std::numeric_limits<double>::min());
        if (std::abs(prev - cur) / scale < config.tolerance) {
            model.converged = true;
            break;
        }
        prev = cur;
    }
    model.final_loss = model.trace.back();
    model.w = std::move(w);
    model.b = std::move(b);
    return model;
}

FactorModel fit_nmf(const Eigen::MatrixXd& input, int k, const NmfConfig& config) {
    if (input.rows() == 0 || input.cols() == 0) throw Error(ErrorCode::kInvalidArgument, "empty NMF input");
    if (k < 1 || k > std::min(input.rows(), input.cols())) {
        throw Error(ErrorCode::kInvalidArgument, "NMF rank " + std::to_string(k) + " outside [1, " +
                                                     std::to_string(std::min(input.rows(), input.cols())) + "]");
    }
    if ((input.array() < 0.0).any() || !input.allFinite()) {
        throw Error(ErrorCode::kInvalidArgument, "NMF input must be finite and non-negative");
    }
    if (config.restarts < 1 || config.max_iters < 1) {
        throw Error(ErrorCode::kInvalidArgument, "NMF needs at least one restart and one iteration");
    }
    const Eigen::MatrixXd data = config.jitter > 0.0 ? Eigen::MatrixXd(input.array() + config.jitter) : input;

    std::vector<FactorModel> runs(static_cast<std::size_t>(config.restarts));
    parallel_for(runs.size(), config.threads, [&](std::size_t r) {
        Rng rng(derive_seed(config.seed, stream::kNmf, r));
        Eigen::MatrixXd w, b;
        nmf_initialize(w, b, data, k, rng);
        runs[r] = nmf_run(data, std::move(w), std::move(b), config);
        runs[r].restart = static_cast<int>(r);
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < runs.size(); ++r) {
        if (runs[r].final_loss < runs[best].final_loss) best = r;
    }
    return std::move(runs[best]);
}

Eigen::VectorXd reconstruct(const FactorModel& model, int player) {
    if (player < 0 || player >= model.w.rows()) {
        throw Error(ErrorCode::kInvalidArgument, "player index " + std::to_string(player) + " out of range");
    }
    return (model.w.row(player) * model.b).transpose();
}

Eigen::MatrixXd PcaModel::reconstruction() const {
    return (scores * components).rowwise() + mean;
}

PcaModel fit_pca(const Eigen::MatrixXd& data, int k) {
    const auto n = data.rows();
    if (k < 1 || n < 2 || k > std::min<Eigen::Index>(n - 1, data.cols())) {
        throw Error(ErrorCode::kInvalidArgument, "PCA rank " + std::to_string(k) + " outside [1, min(N-1, V)]");
    }
    PcaModel model;
    model.mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - model.mean;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    model.components = svd.matrixV().leftCols(k).transpose();
    for (int c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        model.components.row(c).cwiseAbs().maxCoeff(&arg);
        if (model.components(c, arg) < 0.0) model.components.row(c) *= -1.0;
    }
    model.scores = centered * model.components.transpose();
    const Eigen::VectorXd sv = svd.singularValues();
    model.explained_variance = sv.head(k).array().square() / static_cast<double>(n - 1);
    model.total_variance = sv.squaredNorm() / static_cast<double>(n - 1);
    return model;
}

}  // namespace shotfactor
