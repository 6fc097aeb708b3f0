#pragma once

#include <string>

#include "midt/diffusion.hpp"
#include "midt/downstream.hpp"
#include "midt/signal_io.hpp"

namespace midt {

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// Everything a run needs, parsed from one JSON file. Unknown keys are
// rejected with their full path; every seed is explicit.
struct RunConfig {
    std::string out_dir = "runs";

    uint64_t data_seed = 1;
    OracleConfig oracle;

    size_t schedule_T = 200;
    double schedule_beta_1 = 1e-4;
    double schedule_beta_T = 0.02;

    NetConfig net;
    TrainConfig train;

    size_t sample_count = 64;
    uint64_t sample_seed = 2;

    size_t ssim_window = 64;
    size_t ssim_stride = 32;
    uint64_t privacy_seed = 3;

    FoldMixPlan plan;
    ClassifierConfig clf;

    std::string config_hash;  // FNV-1a of the canonical serialized config

    NoiseSchedule schedule() const { return make_schedule(schedule_T, schedule_beta_1, schedule_beta_T); }
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_text(const std::string& text);

std::string default_config_text();

}  // namespace midt
