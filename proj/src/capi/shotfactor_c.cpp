#include "shotfactor/shotfactor.h"

#include <cstring>
#include <string>

#include "shotfactor/pipeline.hpp"

struct sf_config {
    shotfactor::PipelineConfig config;
    sf_log_fn log = nullptr;
    void* user = nullptr;
};

namespace {

thread_local std::string g_last_error;

template <typename Fn>
sf_status guard(Fn&& fn) {
    try {
        g_last_error.clear();
        fn();
        return SF_OK;
    } catch (const shotfactor::Error& e) {
        g_last_error = e.what();
        return static_cast<sf_status>(static_cast<int>(e.code()));
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return SF_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SF_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return SF_ERR_INTERNAL;
    }
}

sf_status null_argument(const char* what) {
    g_last_error = std::string(what) + " must not be NULL";
    return SF_ERR_INVALID_ARGUMENT;
}

shotfactor::Logger logger(const sf_config* c) {
    if (!c->log) return {};
    return [fn = c->log, user = c->user](const std::string& line) { fn(line.c_str(), user); };
}

template <typename Runner>
sf_status run(const sf_config* c, Runner&& runner) {
    if (!c) return null_argument("config");
    return guard([&] { runner(c->config, logger(c)); });
}

}  // namespace

extern "C" {

const char* sf_version(void) { return "0.1.0"; }

const char* sf_status_name(sf_status status) {
    switch (status) {
        case SF_OK: return "ok";
        case SF_ERR_INVALID_ARGUMENT: return "invalid argument";
        case SF_ERR_IO: return "io error";
        case SF_ERR_PARSE: return "parse error";
        case SF_ERR_NUMERIC: return "numerical failure";
        case SF_ERR_STAGE: return "stage failure";
        case SF_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* sf_last_error(void) { return g_last_error.c_str(); }

sf_status sf_config_create(sf_config** out) {
    if (!out) return null_argument("out");
    return guard([&] { *out = new sf_config(); });
}

void sf_config_destroy(sf_config* config) { delete config; }

sf_status sf_config_load(sf_config* config, const char* path) {
    if (!config) return null_argument("config");
    if (!path) return null_argument("path");
    return guard([&] { config->config.load_file(path); });
}

sf_status sf_config_set(sf_config* config, const char* key, const char* value) {
    if (!config) return null_argument("config");
    if (!key || !value) return null_argument("key and value");
    return guard([&] { config->config.set(key, value); });
}

sf_status sf_config_get(const sf_config* config, const char* key, char* buf, size_t size, size_t* needed) {
    if (!config) return null_argument("config");
    if (!key) return null_argument("key");
    return guard([&] {
        const auto value = config->config.get(key);
        if (needed) *needed = value.size() + 1;
        if (buf && size > 0) {
            const auto n = std::min(size - 1, value.size());
            std::memcpy(buf, value.data(), n);
            buf[n] = '\0';
        }
    });
}

sf_status sf_config_apply_environment(sf_config* config) {
    if (!config) return null_argument("config");
    return guard([&] { config->config.apply_environment(); });
}

void sf_config_set_logger(sf_config* config, sf_log_fn fn, void* user) {
    if (!config) return;
    config->log = fn;
    config->user = user;
}

sf_status sf_run_synth(const sf_config* c) { return run(c, [](auto& cfg, auto log) { shotfactor::run_synth(cfg, log); }); }
sf_status sf_run_ingest(const sf_config* c) { return run(c, [](auto& cfg, auto log) { shotfactor::run_ingest(cfg, log); }); }
sf_status sf_run_fit_lgcp(const sf_config* c) {
    return run(c, [](auto& cfg, auto log) { shotfactor::run_fit_lgcp(cfg, log); });
}
sf_status sf_run_factorize(const sf_config* c) {
    return run(c, [](auto& cfg, auto log) { shotfactor::run_factorize(cfg, log); });
}
sf_status sf_run_fit_efficiency(const sf_config* c) {
    return run(c, [](auto& cfg, auto log) { shotfactor::run_fit_efficiency(cfg, log); });
}
sf_status sf_run_evaluate(const sf_config* c) {
    return run(c, [](auto& cfg, auto log) { shotfactor::run_evaluate(cfg, log); });
}
sf_status sf_run_pipeline(const sf_config* c) {
    return run(c, [](auto& cfg, auto log) { shotfactor::run_pipeline(cfg, log); });
}

sf_status sf_render_surface_row(const char* surface_csv, const char* id, const char* pgm_path) {
    if (!surface_csv || !id || !pgm_path) return null_argument("surface_csv, id and pgm_path");
    return guard([&] { shotfactor::render_surface_row(surface_csv, id, pgm_path); });
}

sf_status sf_render_pgm(const double* values, size_t n, double court_width, double court_length, double tile_width,
                        double tile_length, const char* pgm_path) {
    if (!values || !pgm_path) return null_argument("values and pgm_path");
    return guard([&] {
        const shotfactor::CourtGrid grid(court_width, court_length, tile_width, tile_length);
        shotfactor::render_heatmap({values, n}, grid, pgm_path);
    });
}

}  // extern "C"
