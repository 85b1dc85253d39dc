#pragma once

// Stage orchestration behind the CLI: configuration, persisted intermediates
// with checksummed stage records, and graymap rendering.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "shotfactor/court.hpp"
#include "shotfactor/efficiency.hpp"
#include "shotfactor/evaluate.hpp"
#include "shotfactor/kernel.hpp"
#include "shotfactor/lgcp.hpp"
#include "shotfactor/nmf.hpp"
#include "shotfactor/synth.hpp"

namespace shotfactor {

// Environment variable that overrides the configured output directory.
inline constexpr const char* kOutDirEnv = "SHOTFACTOR_OUT";

struct PipelineConfig {
    // grid
    double court_width = 35.0;
    double court_length = 50.0;
    double tile_size = 2.5;
    std::optional<double> tile_length = 2.0;  // unset means square tiles
    // ingestion
    int min_attempts = kDefaultMinAttempts;
    double holdout_fraction = 0.1;
    // gp prior
    KernelHyper kernel;
    double jitter = 0.0;  // <= 0 selects 1e-6 * variance
    // lgcp sampler
    int lgcp_burn_in = 500;
    int lgcp_samples = 500;
    int lgcp_thin = 2;
    std::optional<double> lgcp_offset;
    // nmf
    std::vector<int> ranks{1, 2, 4, 6, 8, 12};
    NmfLoss loss = NmfLoss::kKl;
    std::string nmf_input = "lgcp";  // lgcp | counts
    int restarts = 5;
    int max_iters = 2000;
    double tolerance = 1e-6;
    double nmf_eps = kNmfFloor;
    double count_jitter = 1e-8;
    // efficiency model
    int lvm_rank = 4;
    int lvm_sweeps = 2000;
    int lvm_burn_in = 500;
    EfficiencyPriors priors;
    // evaluation
    std::vector<ModelKind> eval_models{ModelKind::kIndependentLgcp, ModelKind::kNmfKl, ModelKind::kNmfFrobenius,
                                       ModelKind::kRawCountNmf, ModelKind::kPca};
    // synthetic data
    int synth_players = 60;
    int synth_rank = 4;
    int synth_min_shots = 100;
    int synth_max_shots = 366;
    double synth_alpha = 0.5;
    double synth_logit_spread = 0.3;
    // run
    std::optional<std::uint64_t> seed;
    std::string shots_path;  // empty means <out>/shots.csv
    std::string out_dir = "shotfactor_out";
    int threads = 1;

    CourtGrid grid() const;
    std::uint64_t require_seed() const;
    std::string shots_file() const;

    // Throws Error(kInvalidArgument) on unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::string get(const std::string& key) const;
    // Canonical key/value listing; excludes run-only keys (threads).
    std::vector<std::pair<std::string, std::string>> entries() const;
    static const std::vector<std::string>& keys();

    // `key = value` lines; `#` starts a comment.
    void load_file(const std::string& path);
    // Applies SHOTFACTOR_OUT when set.
    void apply_environment();
};

using Logger = std::function<void(const std::string&)>;

enum class Stage { kSynth, kIngest, kFitLgcp, kFactorize, kFitEfficiency, kEvaluate };

std::string_view stage_name(Stage stage);

struct StageOutcome {
    Stage stage;
    bool skipped = false;  // up to date from a previous run
    std::vector<std::string> outputs;
};

// Each run_* call executes one stage unless its stage record shows the same
// configuration and inputs and every output still matches its checksum.
// Failures are rethrown as Error carrying the stage name and original code.
StageOutcome run_synth(const PipelineConfig& config, const Logger& log = {});
StageOutcome run_ingest(const PipelineConfig& config, const Logger& log = {});
StageOutcome run_fit_lgcp(const PipelineConfig& config, const Logger& log = {});
StageOutcome run_factorize(const PipelineConfig& config, const Logger& log = {});
StageOutcome run_fit_efficiency(const PipelineConfig& config, const Logger& log = {});
StageOutcome run_evaluate(const PipelineConfig& config, const Logger& log = {});

// ingest -> fit-lgcp -> factorize -> fit-efficiency -> evaluate. Runs synth
// first when the shot file is missing and no explicit shots path was given.
std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, const Logger& log = {});

// Binary portable graymap: width = tiles along x, height = tiles along y,
// first image row = tile row nearest the baseline, pixel =
// round(255 (v - min) / (max - min)), all-zero when the surface is flat.
std::string encode_heatmap(std::span<const double> surface, const CourtGrid& grid);
void render_heatmap(std::span<const double> surface, const CourtGrid& grid, const std::string& path);

// Renders row `id` of a labelled surface CSV that carries a grid header.
void render_surface_row(const std::string& surface_csv, const std::string& id, const std::string& path);

// Artifact names under the output directory.
namespace artifacts {
std::string nmf_prefix(const std::string& input, NmfLoss loss, int rank);
}

}  // namespace shotfactor
