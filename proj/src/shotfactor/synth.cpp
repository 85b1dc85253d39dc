#include "shotfactor/synth.hpp"

#include <cmath>
#include <numbers>

#include <json.hpp>

#include "shotfactor/io.hpp"

namespace shotfactor {

namespace {

// Archetype geometry in feet on the default 35 x 50 court; scaled to the
// actual grid extent.
constexpr double kRefWidth = 35.0;
constexpr double kRefLength = 50.0;
constexpr Point kHoop{17.5, 4.0};
constexpr double kArcRadius = 16.0;

double deg(double d) { return d * std::numbers::pi / 180.0; }

struct Jitter {
    double dx = 0.0;
    double dy = 0.0;
    double scale = 1.0;
};

double bump(Point p, Point c, double sd) {
    const double dx = p.x - c.x;
    const double dy = p.y - c.y;
    return std::exp(-0.5 * (dx * dx + dy * dy) / (sd * sd));
}

// Band at kArcRadius around the hoop, windowed in angle measured from the
// direction straight up the court (positive toward smaller x).
double arc(Point p, Point hoop, double center_angle, double angle_sd, double band_sd) {
    const double dx = p.x - hoop.x;
    const double dy = p.y - hoop.y;
    const double r = std::hypot(dx, dy);
    const double angle = std::atan2(-dx, dy);
    const double da = angle - center_angle;
    return std::exp(-0.5 * (r - kArcRadius) * (r - kArcRadius) / (band_sd * band_sd)) *
           std::exp(-0.5 * da * da / (angle_sd * angle_sd));
}

double archetype_density(int slot, Point p, const Jitter& j) {
    const Point hoop{kHoop.x + j.dx, kHoop.y + j.dy};
    auto at = [&](double x, double y) { return Point{x + j.dx, y + j.dy}; };
    switch (static_cast<Archetype>(slot)) {
        case Archetype::kRim: return bump(p, hoop, 2.5 * j.scale);
        case Archetype::kCorners:
            return bump(p, at(2.5, 3.5), 2.0 * j.scale) + bump(p, at(32.5, 3.5), 2.0 * j.scale);
        case Archetype::kTopArc: return arc(p, hoop, 0.0, deg(20.0) * j.scale, 1.5 * j.scale);
        case Archetype::kMidRange: return bump(p, at(17.5, 12.0), 2.5 * j.scale);
        case Archetype::kLeftWing: return arc(p, hoop, deg(55.0), deg(12.0) * j.scale, 1.5 * j.scale);
        case Archetype::kRightWing: return arc(p, hoop, deg(-55.0), deg(12.0) * j.scale, 1.5 * j.scale);
        case Archetype::kLeftBaseline: return bump(p, at(7.0, 7.0), 1.8 * j.scale);
        case Archetype::kRightBaseline: return bump(p, at(28.0, 7.0), 1.8 * j.scale);
    }
    return 0.0;
}

// Population-level logits per archetype: rim shots are the most efficient.
constexpr double kArchetypeLogit[kArchetypeSlots] = {0.5, -0.3, -0.55, -0.45, -0.5, -0.5, -0.35, -0.35};

Eigen::VectorXd dirichlet(int k, double alpha, Rng& rng) {
    std::gamma_distribution<double> gamma(alpha, 1.0);
    Eigen::VectorXd w(k);
    do {
        for (int i = 0; i < k; ++i) w[i] = gamma(rng);
    } while (!(w.sum() > 0.0));
    return w / w.sum();
}

}  // namespace

std::string_view archetype_name(int slot) {
    static constexpr std::string_view kNames[kArchetypeSlots] = {
        "rim", "corners", "top_arc", "mid_range", "left_wing", "right_wing", "left_baseline", "right_baseline"};
    if (slot < 0 || slot >= kArchetypeSlots) throw Error(ErrorCode::kInvalidArgument, "archetype slot out of range");
    return kNames[slot];
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    const double denom = a.norm() * b.norm();
    return denom > 0.0 ? a.dot(b) / denom : 0.0;
}

Eigen::MatrixXd make_planted_bases(const CourtGrid& grid, int k, std::uint64_t seed) {
    if (k < 1 || k > kArchetypeSlots) {
        throw Error(ErrorCode::kInvalidArgument, "planted rank " + std::to_string(k) + " outside [1, " +
                                                     std::to_string(kArchetypeSlots) + "]");
    }
    Rng rng(derive_seed(seed, stream::kSynth, 0xba5e5ULL));
    std::uniform_real_distribution<double> shift(-0.5, 0.5);
    std::uniform_real_distribution<double> stretch(0.9, 1.1);
    const double sx = grid.width() / kRefWidth;
    const double sy = grid.length() / kRefLength;

    Eigen::MatrixXd bases(k, grid.size());
    for (int slot = 0; slot < k; ++slot) {
        Jitter j;
        j.dx = shift(rng);
        j.dy = shift(rng);
        j.scale = stretch(rng);
        for (int v = 0; v < grid.size(); ++v) {
            const Point c = grid.center(v);
            bases(slot, v) = archetype_density(slot, {c.x / sx, c.y / sy}, j);
        }
        const double volume = bases.row(slot).sum() * grid.tile_area();
        if (!(volume > 0.0)) throw Error(ErrorCode::kNumeric, "archetype " + std::string(archetype_name(slot)) + " vanishes on this grid");
        bases.row(slot) /= volume;
    }
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            const double cs = cosine_similarity(bases.row(a).transpose(), bases.row(b).transpose());
            if (cs >= 0.3) {
                throw Error(ErrorCode::kNumeric, "archetypes " + std::string(archetype_name(a)) + " and " +
                                                     std::string(archetype_name(b)) + " overlap (cosine " +
                                                     io::format_double(cs) + ") on this grid");
            }
        }
    }
    return bases;
}

std::vector<ShotEvent> sample_player_shots(const std::string& player, const Eigen::VectorXd& weights,
                                           const Eigen::MatrixXd& bases, double budget, const CourtGrid& grid,
                                           Rng& rng) {
    const double total = weights.sum();
    if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "player weights must have positive sum");
    const Eigen::VectorXd intensity = budget * (bases.transpose() * (weights / total));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<ShotEvent> shots;
    for (int v = 0; v < grid.size(); ++v) {
        const double mean = intensity[v] * grid.tile_area();
        if (!(mean > 0.0)) continue;
        std::poisson_distribution<int> poisson(mean);
        const int count = poisson(rng);
        const Point o = grid.tile_origin(v);
        const Point e = grid.tile_extent(v);
        for (int c = 0; c < count; ++c) {
            ShotEvent s;
            s.player = player;
            s.x = o.x + e.x * unif(rng);
            s.y = o.y + e.y * unif(rng);
            shots.push_back(std::move(s));
        }
    }
    return shots;
}

void sample_outcomes(std::vector<ShotEvent>& shots, const Eigen::VectorXd& weights, const Eigen::MatrixXd& bases,
                     const Eigen::VectorXd& logits, const CourtGrid& grid, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (auto& s : shots) {
        const int v = grid.tile_index(s.x, s.y);
        const Eigen::VectorXd p = weights.cwiseProduct(bases.col(v));
        const double total = p.sum();
        int type = 0;
        if (total > 0.0) {
            double u = unif(rng) * total;
            for (type = 0; type + 1 < p.size(); ++type) {
                u -= p[type];
                if (u < 0.0) break;
            }
        }
        s.made = unif(rng) < inv_logit(logits[type]);
    }
}

void SynthConfig::validate() const {
    if (players < 1) throw Error(ErrorCode::kInvalidArgument, "need at least one player");
    if (rank < 1 || rank > kArchetypeSlots) {
        throw Error(ErrorCode::kInvalidArgument, "planted rank must lie in [1, " + std::to_string(kArchetypeSlots) + "]");
    }
    if (min_shots < 0 || max_shots < min_shots) throw Error(ErrorCode::kInvalidArgument, "bad shot budget range");
    if (!(dirichlet_alpha > 0.0) || !(logit_spread >= 0.0)) {
        throw Error(ErrorCode::kInvalidArgument, "dirichlet alpha must be positive and logit spread non-negative");
    }
}

SynthDataset generate_dataset(const SynthConfig& config, int threads) {
    config.validate();
    SynthDataset data;
    PlantedTruth& truth = data.truth;
    const int n = config.players;
    const int k = config.rank;
    truth.bases = make_planted_bases(config.grid, k, config.seed);
    truth.weights.resize(n, k);
    truth.logits.resize(n, k);
    truth.budgets.resize(n);
    truth.global_logits.resize(k);
    for (int j = 0; j < k; ++j) truth.global_logits[j] = kArchetypeLogit[j];

    std::vector<std::vector<ShotEvent>> per_player(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        char id[16];
        std::snprintf(id, sizeof(id), "p%03d", i + 1);
        truth.players.emplace_back(id);
    }
    parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(i);
        Rng rng(derive_seed(config.seed, stream::kSynth, i));
        std::uniform_int_distribution<int> budget(config.min_shots, config.max_shots);
        std::normal_distribution<double> normal(0.0, 1.0);
        truth.budgets[row] = budget(rng);
        truth.weights.row(row) = dirichlet(k, config.dirichlet_alpha, rng).transpose();
        for (int j = 0; j < k; ++j) truth.logits(row, j) = truth.global_logits[j] + config.logit_spread * normal(rng);
        const Eigen::VectorXd w = truth.weights.row(row).transpose();
        per_player[i] = sample_player_shots(truth.players[i], w, truth.bases, truth.budgets[row], config.grid, rng);
        sample_outcomes(per_player[i], w, truth.bases, truth.logits.row(row).transpose(), config.grid, rng);
    });
    for (auto& shots : per_player) data.shots.insert(data.shots.end(), shots.begin(), shots.end());
    return data;
}

void write_dataset(const std::string& dir, const SynthDataset& data, const SynthConfig& config) {
    io::ensure_directory(dir);
    const auto& truth = data.truth;
    write_shots_csv(dir + "/shots.csv", data.shots);
    std::vector<std::string> basis_ids;
    for (int k = 0; k < truth.rank(); ++k) basis_ids.emplace_back(archetype_name(k));
    io::write_labelled_matrix(dir + "/truth_B.csv", basis_ids, truth.bases, &config.grid);
    io::write_labelled_matrix(dir + "/truth_W.csv", truth.players, truth.weights);
    std::vector<std::string> beta_ids = truth.players;
    beta_ids.insert(beta_ids.begin(), "global");
    Eigen::MatrixXd beta(truth.logits.rows() + 1, truth.rank());
    beta.row(0) = truth.global_logits.transpose();
    beta.bottomRows(truth.logits.rows()) = truth.logits;
    io::write_labelled_matrix(dir + "/truth_beta.csv", beta_ids, beta);

    nlohmann::ordered_json manifest;
    manifest["stage"] = "synth";
    manifest["seed"] = config.seed;
    manifest["players"] = config.players;
    manifest["rank"] = config.rank;
    manifest["min_shots"] = config.min_shots;
    manifest["max_shots"] = config.max_shots;
    manifest["grid"] = {config.grid.width(), config.grid.length(), config.grid.tile_width(), config.grid.tile_length()};
    manifest["dirichlet_alpha"] = config.dirichlet_alpha;
    manifest["logit_spread"] = config.logit_spread;
    manifest["total_shots"] = data.shots.size();
    manifest["archetypes"] = basis_ids;
    io::write_text(dir + "/synth_manifest.json", manifest.dump(2) + "\n");
}

}  // namespace shotfactor
