#include "shotfactor/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "shotfactor/io.hpp"

namespace shotfactor {

namespace {

using json = nlohmann::ordered_json;

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    for (auto part : io::split(value, ',')) {
        part = io::trim(part);
        if (part.empty()) continue;
        out.push_back(static_cast<int>(io::parse_int(part, key)));
    }
    if (out.empty()) throw Error(ErrorCode::kInvalidArgument, key + " needs at least one value");
    return out;
}

int to_int(const std::string& value, const std::string& key) { return static_cast<int>(io::parse_int(value, key)); }
double to_double(const std::string& value, const std::string& key) { return io::parse_double(value, key); }

struct Field {
    std::string key;
    std::function<void(PipelineConfig&, const std::string&)> set;
    std::function<std::string(const PipelineConfig&)> get;
    bool persisted = true;  // false for run-only keys left out of manifests
};

#define SF_INT(KEY, MEMBER)                                                                            \
    Field {                                                                                            \
        KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = to_int(v, KEY); },               \
            [](const PipelineConfig& c) { return std::to_string(c.MEMBER); }                           \
    }
#define SF_DOUBLE(KEY, MEMBER)                                                                         \
    Field {                                                                                            \
        KEY, [](PipelineConfig& c, const std::string& v) { c.MEMBER = to_double(v, KEY); },            \
            [](const PipelineConfig& c) { return io::format_double(c.MEMBER); }                        \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        SF_DOUBLE("grid.width", court_width),
        SF_DOUBLE("grid.length", court_length),
        SF_DOUBLE("grid.tile_size", tile_size),
        Field{"grid.tile_length",
              [](PipelineConfig& c, const std::string& v) {
                  if (v == "square" || v.empty()) {
                      c.tile_length.reset();
                  } else {
                      c.tile_length = to_double(v, "grid.tile_length");
                  }
              },
              [](const PipelineConfig& c) { return c.tile_length ? io::format_double(*c.tile_length) : "square"; }},
        SF_INT("ingest.min_attempts", min_attempts),
        SF_DOUBLE("ingest.holdout_fraction", holdout_fraction),
        SF_DOUBLE("kernel.variance", kernel.variance),
        SF_DOUBLE("kernel.length_scale", kernel.length_scale),
        SF_DOUBLE("kernel.jitter", jitter),
        SF_INT("lgcp.burn_in", lgcp_burn_in),
        SF_INT("lgcp.samples", lgcp_samples),
        SF_INT("lgcp.thin", lgcp_thin),
        Field{"lgcp.z0",
              [](PipelineConfig& c, const std::string& v) {
                  if (v == "empirical" || v.empty()) {
                      c.lgcp_offset.reset();
                  } else {
                      c.lgcp_offset = to_double(v, "lgcp.z0");
                  }
              },
              [](const PipelineConfig& c) { return c.lgcp_offset ? io::format_double(*c.lgcp_offset) : "empirical"; }},
        Field{"nmf.k", [](PipelineConfig& c, const std::string& v) { c.ranks = parse_int_list(v, "nmf.k"); },
              [](const PipelineConfig& c) { return join_ints(c.ranks); }},
        Field{"nmf.loss", [](PipelineConfig& c, const std::string& v) { c.loss = parse_loss(v); },
              [](const PipelineConfig& c) { return std::string(loss_name(c.loss)); }},
        Field{"nmf.input",
              [](PipelineConfig& c, const std::string& v) {
                  if (v != "lgcp" && v != "counts") {
                      throw Error(ErrorCode::kInvalidArgument, "nmf.input must be lgcp or counts");
                  }
                  c.nmf_input = v;
              },
              [](const PipelineConfig& c) { return c.nmf_input; }},
        SF_INT("nmf.restarts", restarts),
        SF_INT("nmf.max_iters", max_iters),
        SF_DOUBLE("nmf.tolerance", tolerance),
        SF_DOUBLE("nmf.eps", nmf_eps),
        SF_DOUBLE("nmf.count_jitter", count_jitter),
        SF_INT("lvm.k", lvm_rank),
        SF_INT("lvm.sweeps", lvm_sweeps),
        SF_INT("lvm.burn_in", lvm_burn_in),
        SF_DOUBLE("lvm.sigma0_sq", priors.global_variance),
        SF_DOUBLE("lvm.a", priors.shape),
        SF_DOUBLE("lvm.b", priors.rate),
        Field{"eval.models",
              [](PipelineConfig& c, const std::string& v) {
                  c.eval_models.clear();
                  for (auto part : io::split(v, ',')) {
                      part = io::trim(part);
                      if (!part.empty()) c.eval_models.push_back(parse_model(part));
                  }
              },
              [](const PipelineConfig& c) {
                  std::string out;
                  for (std::size_t i = 0; i < c.eval_models.size(); ++i)
                      out += (i ? "," : "") + std::string(model_name(c.eval_models[i]));
                  return out;
              }},
        SF_INT("synth.players", synth_players),
        SF_INT("synth.rank", synth_rank),
        SF_INT("synth.min_shots", synth_min_shots),
        SF_INT("synth.max_shots", synth_max_shots),
        SF_DOUBLE("synth.alpha", synth_alpha),
        SF_DOUBLE("synth.logit_spread", synth_logit_spread),
        Field{"seed",
              [](PipelineConfig& c, const std::string& v) {
                  const auto t = io::trim(v);
                  std::uint64_t s = 0;
                  auto res = std::from_chars(t.data(), t.data() + t.size(), s);
                  if (res.ec != std::errc() || res.ptr != t.data() + t.size()) {
                      throw Error(ErrorCode::kInvalidArgument, "seed must be an unsigned 64-bit integer");
                  }
                  c.seed = s;
              },
              [](const PipelineConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); }},
        Field{"shots", [](PipelineConfig& c, const std::string& v) { c.shots_path = v; },
              [](const PipelineConfig& c) { return c.shots_path; }},
        Field{"out", [](PipelineConfig& c, const std::string& v) { c.out_dir = v; },
              [](const PipelineConfig& c) { return c.out_dir; }, false},
        Field{"threads", [](PipelineConfig& c, const std::string& v) { c.threads = std::max(1, to_int(v, "threads")); },
              [](const PipelineConfig& c) { return std::to_string(c.threads); }, false},
    };
    return table;
}

#undef SF_INT
#undef SF_DOUBLE

const Field& find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.key == key) return f;
    throw Error(ErrorCode::kInvalidArgument, "unknown configuration key '" + key + "'");
}

}  // namespace

CourtGrid PipelineConfig::grid() const {
    return CourtGrid(court_width, court_length, tile_size, tile_length.value_or(tile_size));
}

std::uint64_t PipelineConfig::require_seed() const {
    if (!seed) throw Error(ErrorCode::kInvalidArgument, "a seed is required (set `seed` in the config or pass --seed)");
    return *seed;
}

std::string PipelineConfig::shots_file() const { return shots_path.empty() ? out_dir + "/shots.csv" : shots_path; }

void PipelineConfig::set(const std::string& key, const std::string& value) {
    find_field(key).set(*this, std::string(io::trim(value)));
}

std::string PipelineConfig::get(const std::string& key) const { return find_field(key).get(*this); }

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& f : fields())
        if (f.persisted) out.emplace_back(f.key, f.get(*this));
    return out;
}

const std::vector<std::string>& PipelineConfig::keys() {
    static const std::vector<std::string> all = [] {
        std::vector<std::string> k;
        for (const auto& f : fields()) k.push_back(f.key);
        return k;
    }();
    return all;
}

void PipelineConfig::load_file(const std::string& path) {
    const auto lines = io::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = io::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::kParse, path + ":" + std::to_string(i + 1) + ": expected `key = value`");
        }
        try {
            set(std::string(io::trim(line.substr(0, eq))), std::string(io::trim(line.substr(eq + 1))));
        } catch (const Error& e) {
            throw Error(e.code(), path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
}

void PipelineConfig::apply_environment() {
    if (const char* out = std::getenv(kOutDirEnv); out && *out) out_dir = out;
}

std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::kSynth: return "synth";
        case Stage::kIngest: return "ingest";
        case Stage::kFitLgcp: return "fit-lgcp";
        case Stage::kFactorize: return "factorize";
        case Stage::kFitEfficiency: return "fit-efficiency";
        case Stage::kEvaluate: return "evaluate";
    }
    return "unknown";
}

namespace artifacts {
std::string nmf_prefix(const std::string& input, NmfLoss loss, int rank) {
    return "nmf_" + input + "_" + std::string(loss_name(loss)) + "_k" + std::to_string(rank);
}
}  // namespace artifacts

namespace {

constexpr const char* kStageDir = "stages";

struct StageSpec {
    Stage stage;
    std::vector<std::string> key_prefixes;  // config keys the stage depends on
    std::vector<std::string> inputs;        // files under out_dir (absolute paths allowed)
};

std::string resolve(const PipelineConfig& config, const std::string& file) {
    return std::filesystem::path(file).is_absolute() ? file : config.out_dir + "/" + file;
}

json config_subset(const PipelineConfig& config, const std::vector<std::string>& prefixes) {
    json out = json::object();
    for (const auto& [key, value] : config.entries()) {
        for (const auto& p : prefixes) {
            if (key == p || key.starts_with(p + ".")) {
                out[key] = value;
                break;
            }
        }
    }
    return out;
}

std::string fingerprint(const PipelineConfig& config, const StageSpec& spec) {
    json fp;
    fp["config"] = config_subset(config, spec.key_prefixes);
    json inputs = json::object();
    for (const auto& in : spec.inputs) {
        const auto path = resolve(config, in);
        if (!io::exists(path)) {
            throw Error(ErrorCode::kIo, "missing input '" + path + "'");
        }
        inputs[in] = io::file_checksum(path);
    }
    fp["inputs"] = inputs;
    return fp.dump();
}

std::string record_path(const PipelineConfig& config, Stage stage) {
    return config.out_dir + "/" + kStageDir + "/" + std::string(stage_name(stage)) + ".json";
}

// True when the stage record matches and every output is intact.
bool up_to_date(const PipelineConfig& config, const StageSpec& spec, const std::string& fp, const Logger& log,
                std::vector<std::string>& outputs) {
    const auto path = record_path(config, spec.stage);
    if (!io::exists(path)) return false;
    json record;
    try {
        record = json::parse(io::read_text(path));
    } catch (const std::exception&) {
        if (log) log("warning: unreadable stage record " + path + "; re-running " + std::string(stage_name(spec.stage)));
        return false;
    }
    if (record.value("fingerprint", std::string()) != fp) return false;
    outputs.clear();
    for (const auto& [file, crc] : record["outputs"].items()) {
        const auto out = resolve(config, file);
        if (!io::exists(out)) {
            if (log) log("warning: " + out + " is missing; re-running " + std::string(stage_name(spec.stage)));
            return false;
        }
        if (io::file_checksum(out) != crc.get<std::string>()) {
            if (log) log("warning: checksum mismatch for " + out + "; re-running " + std::string(stage_name(spec.stage)));
            return false;
        }
        outputs.push_back(file);
    }
    return true;
}

template <typename Body>
StageOutcome run_stage(const PipelineConfig& config, const StageSpec& spec, const Logger& log, Body&& body) {
    const std::string name(stage_name(spec.stage));
    try {
        const auto fp = fingerprint(config, spec);
        StageOutcome outcome{spec.stage, false, {}};
        if (up_to_date(config, spec, fp, log, outcome.outputs)) {
            outcome.skipped = true;
            if (log) log("[" + name + "] up to date, skipping");
            return outcome;
        }
        if (log) log("[" + name + "] running");
        io::ensure_directory(config.out_dir);
        outcome.outputs = body();
        json record;
        record["stage"] = name;
        record["fingerprint"] = fp;
        json outputs = json::object();
        for (const auto& file : outcome.outputs) outputs[file] = io::file_checksum(resolve(config, file));
        record["outputs"] = outputs;
        io::write_text(record_path(config, spec.stage), record.dump(2) + "\n");
        if (log) log("[" + name + "] done");
        return outcome;
    } catch (const Error& e) {
        throw Error(e.code(), "stage " + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorCode::kStage, "stage " + name + ": " + e.what());
    }
}

json manifest_base(const PipelineConfig& config, Stage stage, const std::vector<std::string>& prefixes) {
    json m;
    m["stage"] = std::string(stage_name(stage));
    m["seed"] = config.require_seed();
    m["config"] = config_subset(config, prefixes);
    return m;
}

void check_grid(const CourtGrid& file_grid, const PipelineConfig& config, const std::string& path) {
    if (!(file_grid == config.grid())) {
        throw Error(ErrorCode::kInvalidArgument, "'" + path + "' was written for a different grid than configured");
    }
}

std::vector<ShotEvent> read_both_splits(const PipelineConfig& config, const CourtGrid& grid) {
    auto shots = read_shots_csv(config.out_dir + "/train_shots.csv", grid);
    auto test = read_shots_csv(config.out_dir + "/test_shots.csv", grid);
    shots.insert(shots.end(), test.begin(), test.end());
    return shots;
}

std::vector<int> factor_ranks(const PipelineConfig& config) {
    std::set<int> ranks(config.ranks.begin(), config.ranks.end());
    ranks.insert(config.lvm_rank);
    return {ranks.begin(), ranks.end()};
}

std::vector<std::string> basis_ids(int k) {
    std::vector<std::string> ids;
    for (int i = 0; i < k; ++i) ids.push_back("basis" + std::to_string(i));
    return ids;
}

}  // namespace

StageOutcome run_synth(const PipelineConfig& config, const Logger& log) {
    const StageSpec spec{Stage::kSynth, {"grid", "synth", "seed"}, {}};
    SynthConfig sc;
    sc.players = config.synth_players;
    sc.rank = config.synth_rank;
    sc.min_shots = config.synth_min_shots;
    sc.max_shots = config.synth_max_shots;
    sc.dirichlet_alpha = config.synth_alpha;
    sc.logit_spread = config.synth_logit_spread;
    try {
        sc.grid = config.grid();
        sc.seed = config.require_seed();
        sc.validate();
    } catch (const Error& e) {
        throw Error(e.code(), "stage synth: " + std::string(e.what()));
    }
    return run_stage(config, spec, log, [&] {
        const auto data = generate_dataset(sc, config.threads);
        write_dataset(config.out_dir, data, sc);
        return std::vector<std::string>{"shots.csv", "truth_B.csv", "truth_W.csv", "truth_beta.csv",
                                        "synth_manifest.json"};
    });
}

StageOutcome run_ingest(const PipelineConfig& config, const Logger& log) {
    const std::string shots_input =
        config.shots_path.empty() ? "shots.csv" : std::filesystem::absolute(config.shots_path).string();
    const StageSpec spec{Stage::kIngest, {"grid", "ingest", "seed"}, {shots_input}};
    return run_stage(config, spec, log, [&] {
        const auto grid = config.grid();
        const auto shots = read_shots_csv(config.shots_file(), grid);
        const auto all = build_count_matrix(shots, grid, config.min_attempts);
        std::set<std::string> kept(all.players.begin(), all.players.end());
        std::vector<ShotEvent> kept_shots;
        for (const auto& s : shots)
            if (kept.count(s.player)) kept_shots.push_back(s);
        const auto split = split_holdout(kept_shots, config.holdout_fraction, config.require_seed());
        write_count_matrix_csv(config.out_dir + "/counts.csv", all);
        write_shots_csv(config.out_dir + "/train_shots.csv", split.train);
        write_shots_csv(config.out_dir + "/test_shots.csv", split.test);
        write_count_matrix_csv(config.out_dir + "/train_counts.csv", build_count_matrix_for(split.train, grid, all.players));
        write_count_matrix_csv(config.out_dir + "/test_counts.csv", build_count_matrix_for(split.test, grid, all.players));

        json m = manifest_base(config, Stage::kIngest, {"grid", "ingest"});
        m["shots"] = shots.size();
        m["players"] = all.players.size();
        m["dropped_players"] = players_in_order(shots).size() - all.players.size();
        m["train_shots"] = split.train.size();
        m["test_shots"] = split.test.size();
        io::write_text(config.out_dir + "/ingest_manifest.json", m.dump(2) + "\n");
        if (log) {
            log("  " + std::to_string(all.players.size()) + " players, " + std::to_string(split.train.size()) +
                " train / " + std::to_string(split.test.size()) + " test shots");
        }
        return std::vector<std::string>{"counts.csv",       "train_shots.csv", "test_shots.csv",
                                        "train_counts.csv", "test_counts.csv", "ingest_manifest.json"};
    });
}

StageOutcome run_fit_lgcp(const PipelineConfig& config, const Logger& log) {
    const StageSpec spec{Stage::kFitLgcp, {"grid", "kernel", "lgcp", "seed"}, {"train_counts.csv"}};
    return run_stage(config, spec, log, [&] {
        const auto train = read_count_matrix_csv(config.out_dir + "/train_counts.csv");
        check_grid(train.grid, config, "train_counts.csv");
        const auto factor = build_cov_factor(train.grid, config.kernel, config.jitter);
        LgcpConfig lc;
        lc.offset = config.lgcp_offset;
        lc.burn_in = config.lgcp_burn_in;
        lc.samples = config.lgcp_samples;
        lc.thin = config.lgcp_thin;
        lc.seed = config.require_seed();
        const auto batch = fit_lgcp_all(train, factor, lc, config.threads);
        io::write_labelled_matrix(config.out_dir + "/lgcp_surfaces.csv", batch.players, batch.surfaces, &batch.grid);
        io::write_labelled_matrix(config.out_dir + "/lgcp_variance.csv", batch.players, batch.variances, &batch.grid);

        json m = manifest_base(config, Stage::kFitLgcp, {"grid", "kernel", "lgcp"});
        m["jitter_used"] = factor.jitter();
        json volumes = json::object();
        for (std::size_t n = 0; n < batch.players.size(); ++n) {
            volumes[batch.players[n]] = batch.volumes[static_cast<Eigen::Index>(n)];
        }
        m["volumes"] = volumes;
        io::write_text(config.out_dir + "/lgcp_manifest.json", m.dump(2) + "\n");
        return std::vector<std::string>{"lgcp_surfaces.csv", "lgcp_variance.csv", "lgcp_manifest.json"};
    });
}

StageOutcome run_factorize(const PipelineConfig& config, const Logger& log) {
    const std::string input_file = config.nmf_input == "lgcp" ? "lgcp_surfaces.csv" : "train_counts.csv";
    const StageSpec spec{Stage::kFactorize, {"nmf", "lvm.k", "seed"}, {input_file}};
    return run_stage(config, spec, log, [&] {
        std::vector<std::string> players;
        Eigen::MatrixXd data;
        NmfConfig nc;
        nc.loss = config.loss;
        nc.max_iters = config.max_iters;
        nc.tolerance = config.tolerance;
        nc.restarts = config.restarts;
        nc.seed = config.require_seed();
        nc.eps = config.nmf_eps;
        nc.threads = config.threads;
        if (config.nmf_input == "lgcp") {
            auto m = io::read_labelled_matrix(config.out_dir + "/" + input_file);
            players = std::move(m.ids);
            data = std::move(m.values);
        } else {
            auto m = read_count_matrix_csv(config.out_dir + "/" + input_file);
            players = m.players;
            data = m.as_real();
            nc.jitter = config.count_jitter;
        }
        std::vector<std::string> outputs;
        for (int k : factor_ranks(config)) {
            const auto model = fit_nmf(data, k, nc);
            const auto prefix = artifacts::nmf_prefix(config.nmf_input, config.loss, k);
            io::write_labelled_matrix(config.out_dir + "/" + prefix + "_W.csv", players, model.w);
            io::write_labelled_matrix(config.out_dir + "/" + prefix + "_B.csv", basis_ids(k), model.b);
            std::string manifest = "loss " + std::string(loss_name(model.loss)) + "\n" + "k " + std::to_string(k) +
                                   "\n" + "input " + config.nmf_input + "\n" + "final_loss " +
                                   io::format_double(model.final_loss) + "\n" + "iterations " +
                                   std::to_string(model.iterations) + "\n" + "converged " +
                                   (model.converged ? "1" : "0") + "\n" + "restart " + std::to_string(model.restart) +
                                   "\n" + "restarts " + std::to_string(nc.restarts) + "\n" + "seed " +
                                   std::to_string(nc.seed) + "\n";
            io::write_text(config.out_dir + "/" + prefix + "_manifest.txt", manifest);
            if (log) log("  k=" + std::to_string(k) + " final loss " + io::format_double(model.final_loss));
            for (const char* suffix : {"_W.csv", "_B.csv", "_manifest.txt"}) outputs.push_back(prefix + suffix);
        }
        return outputs;
    });
}

StageOutcome run_fit_efficiency(const PipelineConfig& config, const Logger& log) {
    const auto prefix = artifacts::nmf_prefix(config.nmf_input, config.loss, config.lvm_rank);
    const StageSpec spec{Stage::kFitEfficiency,
                         {"grid", "lvm", "seed"},
                         {prefix + "_W.csv", prefix + "_B.csv", "train_shots.csv", "test_shots.csv"}};
    return run_stage(config, spec, log, [&] {
        const auto grid = config.grid();
        const auto w = io::read_labelled_matrix(config.out_dir + "/" + prefix + "_W.csv");
        const auto b = io::read_labelled_matrix(config.out_dir + "/" + prefix + "_B.csv");
        if (b.values.cols() != grid.size()) throw Error(ErrorCode::kInvalidArgument, "basis width does not match grid");
        const auto loadings = adjust_weights(w.values, b.values);
        for (const auto& warning : loadings.warnings)
            if (log) log("  warning: " + warning);
        const auto shots = read_both_splits(config, grid);
        const auto data = make_efficiency_data(shots, w.ids, grid);
        EfficiencyConfig ec;
        ec.sweeps = config.lvm_sweeps;
        ec.burn_in = config.lvm_burn_in;
        ec.seed = config.require_seed();
        ec.priors = config.priors;
        ec.threads = config.threads;
        const auto fit = fit_efficiency(data, loadings, ec);

        const auto k = loadings.rank();
        io::write_labelled_matrix(config.out_dir + "/efficiency_beta.csv", w.ids, fit.mean.logits);
        io::write_labelled_matrix(config.out_dir + "/efficiency_prob.csv", w.ids, fit.mean_probability);
        Eigen::MatrixXd global(4, k);
        global.row(0) = fit.mean.global.transpose();
        global.row(1) = fit.mean.variance.transpose();
        global.row(2) = fit.global_sd.transpose();
        global.row(3) = fit.mean_global_probability.transpose();
        const std::vector<std::string> global_ids{"beta0", "sigma2", "beta0_sd", "global_prob"};
        io::write_labelled_matrix(config.out_dir + "/efficiency_global.csv", global_ids, global);

        Eigen::MatrixXd surfaces(static_cast<Eigen::Index>(w.ids.size()) + 1, grid.size());
        surfaces.row(0) = global_efficiency_surface(loadings, fit.mean.global).transpose();
        for (Eigen::Index n = 0; n < loadings.weights.rows(); ++n) {
            surfaces.row(n + 1) =
                efficiency_surface(loadings.weights.row(n).transpose(), loadings.bases, fit.mean.logits.row(n).transpose())
                    .transpose();
        }
        std::vector<std::string> surface_ids = w.ids;
        surface_ids.insert(surface_ids.begin(), "global");
        io::write_labelled_matrix(config.out_dir + "/efficiency_surfaces.csv", surface_ids, surfaces, &grid);

        std::string trace = "sweep,loglik";
        for (int j = 0; j < k; ++j) trace += ",sigma2_" + std::to_string(j);
        for (int j = 0; j < k; ++j) trace += ",beta0_" + std::to_string(j);
        trace += "\n";
        for (Eigen::Index s = 0; s < fit.loglik_trace.size(); ++s) {
            trace += std::to_string(s) + "," + io::format_double(fit.loglik_trace[s]);
            for (int j = 0; j < k; ++j) trace += "," + io::format_double(fit.variance_trace(s, j));
            for (int j = 0; j < k; ++j) trace += "," + io::format_double(fit.global_trace(s, j));
            trace += "\n";
        }
        io::write_text(config.out_dir + "/efficiency_trace.csv", trace);

        json m = manifest_base(config, Stage::kFitEfficiency, {"lvm", "nmf.loss", "nmf.input"});
        m["factor_model"] = prefix;
        m["shots"] = data.size();
        m["kept_bases"] = loadings.kept;
        io::write_text(config.out_dir + "/efficiency_manifest.json", m.dump(2) + "\n");
        return std::vector<std::string>{"efficiency_beta.csv",     "efficiency_prob.csv",  "efficiency_global.csv",
                                        "efficiency_surfaces.csv", "efficiency_trace.csv", "efficiency_manifest.json"};
    });
}

StageOutcome run_evaluate(const PipelineConfig& config, const Logger& log) {
    std::vector<std::string> inputs{"train_counts.csv", "test_counts.csv", "lgcp_surfaces.csv"};
    const bool has_truth = io::exists(config.out_dir + "/truth_B.csv");
    if (has_truth) inputs.push_back("truth_B.csv");
    const StageSpec spec{Stage::kEvaluate, {"ingest.holdout_fraction", "nmf", "eval", "seed"}, inputs};
    return run_stage(config, spec, log, [&] {
        ComparisonInput input;
        input.train = read_count_matrix_csv(config.out_dir + "/train_counts.csv");
        input.test = read_count_matrix_csv(config.out_dir + "/test_counts.csv");
        const auto surfaces = io::read_labelled_matrix(config.out_dir + "/lgcp_surfaces.csv");
        if (surfaces.ids != input.train.players) {
            throw Error(ErrorCode::kInvalidArgument, "LGCP surfaces and train counts list different players");
        }
        input.lgcp_surfaces = surfaces.values;
        input.holdout_fraction = config.holdout_fraction;
        ComparisonConfig cc;
        cc.ranks = config.ranks;
        cc.models = config.eval_models;
        cc.nmf.max_iters = config.max_iters;
        cc.nmf.tolerance = config.tolerance;
        cc.nmf.restarts = config.restarts;
        cc.nmf.seed = config.require_seed();
        cc.nmf.eps = config.nmf_eps;
        cc.nmf.threads = config.threads;
        cc.count_jitter = config.count_jitter;
        auto report = run_comparison(input, cc);

        if (has_truth) {
            const auto truth = io::read_labelled_matrix(config.out_dir + "/truth_B.csv");
            const int k = static_cast<int>(truth.values.rows());
            if (k <= std::min(input.lgcp_surfaces.rows(), input.lgcp_surfaces.cols())) {
                NmfConfig nc = cc.nmf;
                nc.loss = NmfLoss::kKl;
                const auto model = fit_nmf(input.lgcp_surfaces, k, nc);
                report.recovery = basis_recovery_score(model.b, truth.values);
                if (log) log("  planted-basis recovery: " + io::format_double(report.recovery->mean_similarity));
            }
        }
        write_eval_report(config.out_dir, report);
        return std::vector<std::string>{"eval_report.csv", "eval_players.csv", "eval_summary.txt"};
    });
}

std::vector<StageOutcome> run_pipeline(const PipelineConfig& config, const Logger& log) {
    std::vector<StageOutcome> outcomes;
    const auto default_shots = config.out_dir + "/shots.csv";
    if (config.shots_path.empty() && (!io::exists(default_shots) || io::exists(record_path(config, Stage::kSynth)))) {
        outcomes.push_back(run_synth(config, log));
    }
    outcomes.push_back(run_ingest(config, log));
    outcomes.push_back(run_fit_lgcp(config, log));
    outcomes.push_back(run_factorize(config, log));
    outcomes.push_back(run_fit_efficiency(config, log));
    outcomes.push_back(run_evaluate(config, log));
    return outcomes;
}

std::string encode_heatmap(std::span<const double> surface, const CourtGrid& grid) {
    if (surface.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot render an empty surface");
    if (static_cast<int>(surface.size()) != grid.size()) {
        throw Error(ErrorCode::kInvalidArgument, "surface has " + std::to_string(surface.size()) +
                                                     " values but the grid has " + std::to_string(grid.size()) +
                                                     " tiles");
    }
    const auto [lo_it, hi_it] = std::minmax_element(surface.begin(), surface.end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    std::string out = "P5\n" + std::to_string(grid.cols()) + " " + std::to_string(grid.rows()) + "\n255\n";
    out.reserve(out.size() + surface.size());
    for (double v : surface) {
        const double scaled = range > 0.0 ? std::round(255.0 * (v - lo) / range) : 0.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::clamp(scaled, 0.0, 255.0))));
    }
    return out;
}

void render_heatmap(std::span<const double> surface, const CourtGrid& grid, const std::string& path) {
    io::write_text(path, encode_heatmap(surface, grid));
}

void render_surface_row(const std::string& surface_csv, const std::string& id, const std::string& path) {
    const auto m = io::read_labelled_matrix(surface_csv);
    if (!m.has_grid) throw Error(ErrorCode::kParse, "'" + surface_csv + "' has no grid header");
    const auto it = std::find(m.ids.begin(), m.ids.end(), id);
    if (it == m.ids.end()) throw Error(ErrorCode::kInvalidArgument, "no row '" + id + "' in '" + surface_csv + "'");
    const Eigen::VectorXd row = m.values.row(it - m.ids.begin()).transpose();
    render_heatmap({row.data(), static_cast<std::size_t>(row.size())}, m.grid, path);
}

}  // namespace shotfactor
