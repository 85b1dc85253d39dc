#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shotfactor/shotfactor.h"

namespace {

struct Shared {
    std::string config_path;
    std::optional<std::string> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
    std::vector<std::string> overrides;  // key=value
    bool quiet = false;
};

struct FactorizeFlags {
    std::optional<std::string> k;
    std::optional<std::string> loss;
    std::optional<std::string> input;
    std::optional<int> restarts;
};

struct RenderFlags {
    std::string surface;
    std::string id = "global";
    std::string image;
};

using ConfigPtr = std::unique_ptr<sf_config, decltype(&sf_config_destroy)>;

int fail(sf_status status, const char* context) {
    std::fprintf(stderr, "shotfactor: %s: %s (%s, code %d)\n", context, sf_last_error(), sf_status_name(status),
                 static_cast<int>(status));
    return static_cast<int>(status);
}

void print_line(const char* line, void*) { std::fprintf(stderr, "%s\n", line); }

void add_shared(CLI::App* cmd, Shared& shared) {
    cmd->add_option("--config", shared.config_path, "configuration file (key = value lines)");
    cmd->add_option("--seed", shared.seed, "global seed (unsigned 64-bit)");
    cmd->add_option("--out", shared.out, "output directory");
    cmd->add_option("--threads", shared.threads, "worker threads; results do not depend on it");
    cmd->add_option("--set", shared.overrides, "override a configuration key, key=value")->take_all();
    cmd->add_flag("-q,--quiet", shared.quiet, "suppress progress lines");
}

// File, then environment, then command-line flags.
sf_status build_config(const Shared& shared, const FactorizeFlags& fact, sf_config** out) {
    sf_status st = sf_config_create(out);
    if (st != SF_OK) return st;
    sf_config* c = *out;
    if (!shared.config_path.empty() && (st = sf_config_load(c, shared.config_path.c_str())) != SF_OK) return st;
    if ((st = sf_config_apply_environment(c)) != SF_OK) return st;
    auto set = [&](const char* key, const std::string& value) { return sf_config_set(c, key, value.c_str()); };
    for (const auto& kv : shared.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            if ((st = sf_config_set(c, kv.c_str(), "")) != SF_OK) return st;
            continue;
        }
        if ((st = set(kv.substr(0, eq).c_str(), kv.substr(eq + 1))) != SF_OK) return st;
    }
    if (shared.seed && (st = set("seed", *shared.seed)) != SF_OK) return st;
    if (shared.out && (st = set("out", *shared.out)) != SF_OK) return st;
    if (shared.threads && (st = set("threads", std::to_string(*shared.threads))) != SF_OK) return st;
    if (fact.k && (st = set("nmf.k", *fact.k)) != SF_OK) return st;
    if (fact.loss && (st = set("nmf.loss", *fact.loss)) != SF_OK) return st;
    if (fact.input && (st = set("nmf.input", *fact.input)) != SF_OK) return st;
    if (fact.restarts && (st = set("nmf.restarts", std::to_string(*fact.restarts))) != SF_OK) return st;
    if (!shared.quiet) sf_config_set_logger(c, print_line, nullptr);
    return SF_OK;
}

std::string config_value(const sf_config* c, const char* key) {
    size_t needed = 0;
    sf_config_get(c, key, nullptr, 0, &needed);
    std::string value(needed, '\0');
    sf_config_get(c, key, value.data(), value.size(), &needed);
    value.resize(needed > 0 ? needed - 1 : 0);
    return value;
}

int run_render(const sf_config* c, const RenderFlags& flags) {
    namespace fs = std::filesystem;
    const std::string out_dir = config_value(c, "out");
    std::string surface = flags.surface;
    if (!fs::exists(surface) && fs::path(surface).is_relative()) surface = out_dir + "/" + surface;
    std::string image = flags.image;
    if (image.empty()) image = out_dir + "/" + fs::path(surface).stem().string() + "_" + flags.id + ".pgm";
    const sf_status st = sf_render_surface_row(surface.c_str(), flags.id.c_str(), image.c_str());
    if (st != SF_OK) return fail(st, "render");
    std::printf("%s\n", image.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Shot-chart intensity surfaces, shared bases and per-basis efficiency"};
    app.set_version_flag("--version", sf_version());
    app.require_subcommand(1);

    Shared shared;
    FactorizeFlags fact;
    RenderFlags render;

    struct Command {
        const char* name;
        const char* help;
        sf_status (*fn)(const sf_config*);
    };
    const Command commands[] = {
        {"synth", "generate a synthetic dataset with planted bases and efficiencies", sf_run_synth},
        {"ingest", "bin shots, filter players and split off the held-out shots", sf_run_ingest},
        {"fit-lgcp", "fit one intensity surface per player", sf_run_fit_lgcp},
        {"factorize", "factorize the surfaces (or raw counts) into shared bases", sf_run_factorize},
        {"fit-efficiency", "fit per-basis shooting efficiency by Gibbs sampling", sf_run_fit_efficiency},
        {"evaluate", "held-out predictive comparison across models and ranks", sf_run_evaluate},
        {"pipeline", "run every stage, skipping those already up to date", sf_run_pipeline},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        add_shared(sub, shared);
        if (std::string(cmd.name) == "factorize") {
            sub->add_option("--k", fact.k, "rank or comma-separated ranks");
            sub->add_option("--loss", fact.loss, "kl or frobenius")->check(CLI::IsMember({"kl", "frobenius"}));
            sub->add_option("--input", fact.input, "lgcp or counts")->check(CLI::IsMember({"lgcp", "counts"}));
            sub->add_option("--restarts", fact.restarts, "random restarts");
        }
        subs.emplace_back(sub, &cmd);
    }
    auto* render_cmd = app.add_subcommand("render", "write one surface row as a binary graymap");
    add_shared(render_cmd, shared);
    render_cmd->add_option("--surface", render.surface, "surface CSV with a grid header")->required();
    render_cmd->add_option("--id", render.id, "row id to render");
    render_cmd->add_option("--image", render.image, "output .pgm path");

    CLI11_PARSE(app, argc, argv);

    sf_config* raw = nullptr;
    const sf_status built = build_config(shared, fact, &raw);
    ConfigPtr config(raw, sf_config_destroy);
    if (built != SF_OK) return fail(built, "configuration");

    if (render_cmd->parsed()) return run_render(config.get(), render);
    for (const auto& [sub, cmd] : subs) {
        if (!sub->parsed()) continue;
        const sf_status st = cmd->fn(config.get());
        if (st != SF_OK) return fail(st, cmd->name);
        return 0;
    }
    return 0;
}
