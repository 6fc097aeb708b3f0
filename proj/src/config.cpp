#include "midt/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace midt {

using nlohmann::json;

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!known.count(it.key()))
            throw ConfigError("unknown config key '" + (path.empty() ? it.key() : path + "." + it.key()) + "'");
}

template <typename T>
void get_if(const json& obj, const char* key, T& out) {
    if (obj.contains(key)) out = obj.at(key).get<T>();
}

GroupMask parse_mask(const json& arr, const std::string& path) {
    GroupMask mask = GroupMask::none();
    for (const auto& g : arr) {
        std::string name = g.get<std::string>();
        bool found = false;
        for (size_t k = 0; k < GroupSchema::kNumGroups; ++k)
            if (name == GroupSchema::group_names()[k]) {
                mask.enabled[k] = true;
                found = true;
            }
        if (!found) throw ConfigError("unknown group '" + name + "' in " + path);
    }
    return mask;
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

std::string hex16(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[size_t(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    RunConfig cfg;
    reject_unknown(j, {"out_dir", "data", "schedule", "net", "train", "sample", "metrics", "downstream"}, "");
    get_if(j, "out_dir", cfg.out_dir);

    if (j.contains("data")) {
        const json& d = j["data"];
        reject_unknown(d, {"seed", "n_records", "n_leads", "length", "sample_rate_hz",
                           "latent_sources", "noise_std", "heart_rate_min_bpm",
                           "heart_rate_max_bpm", "n_folds", "mixing"}, "data");
        get_if(d, "seed", cfg.data_seed);
        get_if(d, "n_records", cfg.oracle.n_records);
        get_if(d, "n_leads", cfg.oracle.n_leads);
        get_if(d, "length", cfg.oracle.length);
        get_if(d, "sample_rate_hz", cfg.oracle.sample_rate_hz);
        get_if(d, "latent_sources", cfg.oracle.latent_sources);
        get_if(d, "noise_std", cfg.oracle.noise_std);
        get_if(d, "heart_rate_min_bpm", cfg.oracle.heart_rate_min_bpm);
        get_if(d, "heart_rate_max_bpm", cfg.oracle.heart_rate_max_bpm);
        get_if(d, "n_folds", cfg.oracle.n_folds);
        if (d.contains("mixing")) {
            auto rows = d["mixing"].get<std::vector<std::vector<double>>>();
            std::vector<double> flat;
            for (const auto& r : rows) {
                if (r.size() != cfg.oracle.latent_sources)
                    throw ConfigError("data.mixing rows must have latent_sources entries");
                flat.insert(flat.end(), r.begin(), r.end());
            }
            cfg.oracle.mixing = Tensor({rows.size(), cfg.oracle.latent_sources}, flat);
        }
    }

    if (j.contains("schedule")) {
        const json& s = j["schedule"];
        reject_unknown(s, {"T", "beta_1", "beta_T"}, "schedule");
        get_if(s, "T", cfg.schedule_T);
        get_if(s, "beta_1", cfg.schedule_beta_1);
        get_if(s, "beta_T", cfg.schedule_beta_T);
    }

    if (j.contains("net")) {
        const json& n = j["net"];
        reject_unknown(n, {"hidden", "n_blocks", "kernel", "step_embedding_dim", "dilations"}, "net");
        get_if(n, "hidden", cfg.net.hidden);
        get_if(n, "n_blocks", cfg.net.n_blocks);
        get_if(n, "kernel", cfg.net.kernel);
        get_if(n, "step_embedding_dim", cfg.net.step_embedding_dim);
        get_if(n, "dilations", cfg.net.dilations);
    }

    if (j.contains("train")) {
        const json& t = j["train"];
        reject_unknown(t, {"midt_weight", "batch_size", "steps", "lr", "seed",
                           "midt_windows", "log_floor", "groups"}, "train");
        get_if(t, "midt_weight", cfg.train.midt_weight);
        get_if(t, "batch_size", cfg.train.batch_size);
        get_if(t, "steps", cfg.train.steps);
        get_if(t, "lr", cfg.train.lr);
        get_if(t, "seed", cfg.train.seed);
        get_if(t, "log_floor", cfg.train.midt.log_floor);
        if (t.contains("midt_windows")) {
            cfg.train.midt.resolutions.clear();
            for (size_t w : t["midt_windows"].get<std::vector<size_t>>())
                cfg.train.midt.resolutions.push_back({w, std::max<size_t>(1, w / 4)});
        }
        if (t.contains("groups")) cfg.train.group_mask = parse_mask(t["groups"], "train.groups");
    }

    if (j.contains("sample")) {
        const json& s = j["sample"];
        reject_unknown(s, {"count", "seed"}, "sample");
        get_if(s, "count", cfg.sample_count);
        get_if(s, "seed", cfg.sample_seed);
    }

    if (j.contains("metrics")) {
        const json& m = j["metrics"];
        reject_unknown(m, {"ssim_window", "ssim_stride", "privacy_seed"}, "metrics");
        get_if(m, "ssim_window", cfg.ssim_window);
        get_if(m, "ssim_stride", cfg.ssim_stride);
        get_if(m, "privacy_seed", cfg.privacy_seed);
    }

    if (j.contains("downstream")) {
        const json& d = j["downstream"];
        reject_unknown(d, {"mode", "repetitions", "seed", "clf_hidden", "clf_kernel",
                           "clf_steps", "clf_batch_size", "clf_lr"}, "downstream");
        if (d.contains("mode")) {
            std::string m = d["mode"].get<std::string>();
            if (m == "augment")
                cfg.plan.mode = FoldMixPlan::Mode::augment;
            else if (m == "substitute")
                cfg.plan.mode = FoldMixPlan::Mode::substitute;
            else
                throw ConfigError("downstream.mode must be 'augment' or 'substitute'");
        }
        get_if(d, "repetitions", cfg.plan.repetitions);
        get_if(d, "seed", cfg.plan.seed);
        get_if(d, "clf_hidden", cfg.clf.hidden);
        get_if(d, "clf_kernel", cfg.clf.kernel);
        get_if(d, "clf_steps", cfg.clf.steps);
        get_if(d, "clf_batch_size", cfg.clf.batch_size);
        get_if(d, "clf_lr", cfg.clf.lr);
    }

    // canonical serialization (nlohmann objects are key-sorted)
    cfg.config_hash = hex16(fnv1a(j.dump()));
    return cfg;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_run_config_text(text);
}

std::string default_config_text() {
    return R"({
  "out_dir": "runs",
  "data": {
    "seed": 1,
    "n_records": 200,
    "n_leads": 2,
    "length": 64,
    "sample_rate_hz": 100.0,
    "latent_sources": 1,
    "noise_std": 0.02,
    "heart_rate_min_bpm": 55.0,
    "heart_rate_max_bpm": 90.0,
    "n_folds": 10
  },
  "schedule": {"T": 200, "beta_1": 1e-4, "beta_T": 0.02},
  "net": {"hidden": 24, "n_blocks": 3, "kernel": 3, "step_embedding_dim": 32, "dilations": [1, 2, 4]},
  "train": {
    "midt_weight": 0.1,
    "batch_size": 8,
    "steps": 300,
    "lr": 0.002,
    "seed": 7,
    "midt_windows": [16, 32],
    "groups": ["diagnostic", "form", "rhythm", "age", "gender"]
  },
  "sample": {"count": 40, "seed": 11},
  "metrics": {"ssim_window": 32, "ssim_stride": 16, "privacy_seed": 3},
  "downstream": {
    "mode": "substitute",
    "repetitions": 3,
    "seed": 5,
    "clf_hidden": 12,
    "clf_kernel": 5,
    "clf_steps": 150,
    "clf_batch_size": 12,
    "clf_lr": 0.01
  }
})";
}

}  // namespace midt
