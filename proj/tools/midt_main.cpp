#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "midt/checkpoint.hpp"
#include "midt/config.hpp"
#include "midt/diffusion.hpp"
#include "midt/downstream.hpp"
#include "midt/metrics.hpp"
#include "midt/spectro.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace midt;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

fs::path run_dir(const RunConfig& cfg, const std::string& out_override) {
    fs::path base = out_override.empty() ? fs::path(cfg.out_dir) : fs::path(out_override);
    fs::path dir = base / cfg.config_hash;
    fs::create_directories(dir);
    return dir;
}

void stamp(std::ostream& out, const RunConfig& cfg, uint64_t seed) {
    out << "# config_hash=" << cfg.config_hash << "\n";
    out << "# seed=" << seed << "\n";
    out << "# metrics_version=" << kMetricsVersion << "\n";
}

json stamp_json(const RunConfig& cfg, uint64_t seed) {
    json j;
    j["config_hash"] = cfg.config_hash;
    j["seed"] = seed;
    j["metrics_version"] = kMetricsVersion;
    return j;
}

Dataset load_required_dataset(const fs::path& dir, const char* name) {
    fs::path p = dir / name;
    if (!fs::exists(p))
        throw ConfigError("cannot open required artifact '" + p.string() + "' (run the producing command first)");
    return read_dataset(p.string());
}

std::vector<LeadSet> leads_of(const Dataset& ds) {
    std::vector<LeadSet> out;
    out.reserve(ds.size());
    for (const auto& r : ds.records) out.push_back(r.leads);
    return out;
}

void write_matrix_csv(const Tensor& m, const fs::path& path, const RunConfig& cfg, uint64_t seed) {
    std::ofstream out(path);
    stamp(out, cfg, seed);
    for (size_t i = 0; i < m.rows(); ++i) {
        for (size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << fmt(m.at(i, j));
        out << "\n";
    }
}

void cmd_gen_data(const RunConfig& cfg, const fs::path& dir, long export_record) {
    Dataset ds = make_oracle_dataset(cfg.oracle, cfg.data_seed);
    write_dataset(ds, (dir / "dataset").string());
    if (export_record >= 0) {
        if (size_t(export_record) >= ds.size()) throw ConfigError("--export-record index out of range");
        write_record_csv(ds.records[size_t(export_record)],
                         (dir / ("record" + std::to_string(export_record) + ".csv")).string());
    }
    std::cout << "wrote " << ds.size() << " records to " << (dir / "dataset") << "\n";
}

void cmd_train(const RunConfig& cfg, const fs::path& dir) {
    Dataset ds = load_required_dataset(dir, "dataset");
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);
    NoiseSchedule sched = cfg.schedule();
    TrainResult res = train(split.train, cfg.net, sched, cfg.train);

    std::ofstream trace(dir / "loss_trace.csv");
    stamp(trace, cfg, cfg.train.seed);
    trace << "step,mse,midt,total\n";
    for (const auto& row : res.trace)
        trace << row.step << "," << fmt(row.mse) << "," << fmt(row.midt) << ","
              << fmt(row.total) << "\n";
    save_checkpoint(res.params, (dir / "checkpoint").string(), cfg.config_hash);
    std::cout << "trained " << cfg.train.steps << " steps; final total loss "
              << res.trace.back().total << "\n";
}

void cmd_sample(const RunConfig& cfg, const fs::path& dir) {
    Dataset ds = load_required_dataset(dir, "dataset");
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);
    if (split.train.empty()) throw Error("sample: empty training split");
    std::string ckpt_hash;
    ParameterStore params = load_checkpoint((dir / "checkpoint").string(), &ckpt_hash);
    NoiseSchedule sched = cfg.schedule();

    Dataset synth;
    for (size_t i = 0; i < cfg.sample_count; ++i) {
        const Record& src = split.train.records[i % split.train.size()];
        auto c = build_conditioning_vector(src.meta, params, cfg.train.group_mask);
        auto xs = sample(params, cfg.net, c, sched, 1, src.leads.length(), src.leads.n_leads(),
                         src.leads.sample_rate_hz, Rng(cfg.sample_seed).fork(i).next_u64());
        Record rec;
        rec.leads = std::move(xs[0]);
        rec.meta = src.meta;
        rec.fold = src.fold;
        synth.records.push_back(std::move(rec));
    }
    write_dataset(synth, (dir / "synth").string());
    std::cout << "sampled " << synth.size() << " records to " << (dir / "synth") << "\n";
}

void cmd_eval(const RunConfig& cfg, const fs::path& dir) {
    Dataset ds = load_required_dataset(dir, "dataset");
    Dataset synth = load_required_dataset(dir, "synth");
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);

    double lo = 1e300, hi = -1e300;
    for (const auto& r : split.train.records)
        for (double v : r.leads.samples.data) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    double l_range = std::max(hi - lo, 1e-9);
    size_t ssim_w = std::min(cfg.ssim_window, synth.records[0].leads.length());

    std::ofstream csv(dir / "fidelity.csv");
    stamp(csv, cfg, cfg.sample_seed);
    csv << "index,rmse,mse,snr_db,fourier_distance,hausdorff,ssim,midt_loss\n";
    std::vector<double> rmses;
    json agg = stamp_json(cfg, cfg.sample_seed);
    std::map<std::string, double> sums;
    MidtConfig mc = cfg.train.midt;
    for (size_t i = 0; i < synth.size(); ++i) {
        const LeadSet& ref = split.train.records[i % split.train.size()].leads;
        const LeadSet& gen = synth.records[i].leads;
        Fidelity f = pointwise_fidelity(ref, gen);
        double fd = fourier_distance(ref, gen);
        double hd = hausdorff_distance(ref, gen);
        double ss = ssim_1d(ref, gen, ssim_w, std::min(cfg.ssim_stride, ssim_w), l_range);
        double ml = midt_loss(gen, ref, mc);
        rmses.push_back(f.rmse);
        csv << i << "," << fmt(f.rmse) << "," << fmt(f.mse) << ","
            << (f.snr_db ? fmt(*f.snr_db) : "") << "," << fmt(fd) << "," << fmt(hd) << ","
            << fmt(ss) << "," << fmt(ml) << "\n";
        sums["rmse"] += f.rmse;
        sums["mse"] += f.mse;
        sums["fourier_distance"] += fd;
        sums["hausdorff"] += hd;
        sums["ssim"] += ss;
        sums["midt_loss"] += ml;
    }
    for (auto& [k, v] : sums) agg["mean_" + k] = v / double(synth.size());
    if (rmses.size() >= 4) {
        auto flags = outlier_flags(rmses);
        size_t n_out = 0;
        for (bool f : flags) n_out += f ? 1 : 0;
        agg["rmse_outliers"] = n_out;
    }

    Tensor corr_real = corr_matrix(leads_of(split.train));
    Tensor corr_synth = corr_matrix(leads_of(synth));
    auto [avg_err, max_err] = corr_error(corr_real, corr_synth);
    Tensor diff = corr_real;
    for (size_t i = 0; i < diff.size(); ++i) diff.data[i] -= corr_synth.data[i];
    write_matrix_csv(corr_real, dir / "corr_real.csv", cfg, cfg.sample_seed);
    write_matrix_csv(corr_synth, dir / "corr_synth.csv", cfg, cfg.sample_seed);
    write_matrix_csv(diff, dir / "corr_diff.csv", cfg, cfg.sample_seed);
    agg["corr_avg_abs_error"] = avg_err;
    agg["corr_max_abs_error"] = max_err;

    std::ofstream summary(dir / "eval_summary.json");
    summary << agg.dump(1) << "\n";
    std::cout << "eval: mean rmse " << sums["rmse"] / double(synth.size()) << ", corr error avg "
              << avg_err << " max " << max_err << "\n";
}

void cmd_privacy(const RunConfig& cfg, const fs::path& dir) {
    Dataset ds = load_required_dataset(dir, "dataset");
    Dataset synth = load_required_dataset(dir, "synth");
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);
    PrivacyReport rep = privacy_report(leads_of(split.train), leads_of(split.test), leads_of(synth));

    json out = stamp_json(cfg, cfg.privacy_seed);
    out["mir"] = rep.mir;
    out["nnaa"] = rep.nnaa;
    out["mean_nn_train"] = rep.mean_nn_train;
    out["mean_nn_holdout"] = rep.mean_nn_holdout;
    std::ofstream f(dir / "privacy_summary.json");
    f << out.dump(1) << "\n";
    std::cout << "privacy: mir " << rep.mir << ", nnaa " << rep.nnaa << "\n";
}

void cmd_downstream(const RunConfig& cfg, const fs::path& dir) {
    Dataset ds = load_required_dataset(dir, "dataset");
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);
    ParameterStore params = load_checkpoint((dir / "checkpoint").string());
    NoiseSchedule sched = cfg.schedule();
    size_t fold_size = subset_by_folds(ds, {1}).size();

    // one full 8-fold synthetic set per repetition seed, sliced per cell
    std::map<uint64_t, Dataset> cache;
    auto gen = [&](size_t n_folds, uint64_t seed) {
        auto it = cache.find(seed);
        if (it == cache.end()) {
            Dataset full;
            for (size_t i = 0; i < 8 * fold_size; ++i) {
                const Record& src = split.train.records[i % split.train.size()];
                auto c = build_conditioning_vector(src.meta, params, cfg.train.group_mask);
                auto xs = sample(params, cfg.net, c, sched, 1, src.leads.length(),
                                 src.leads.n_leads(), src.leads.sample_rate_hz,
                                 Rng(seed).fork(i).next_u64());
                Record rec;
                rec.leads = std::move(xs[0]);
                rec.meta = src.meta;
                rec.fold = src.fold;
                full.records.push_back(std::move(rec));
            }
            it = cache.emplace(seed, std::move(full)).first;
        }
        Dataset out;
        size_t n = std::min(n_folds * fold_size, it->second.size());
        out.records.assign(it->second.records.begin(), it->second.records.begin() + long(n));
        return out;
    };

    auto cells = fold_mix_experiment(ds, gen, cfg.plan, cfg.clf);
    std::ofstream csv(dir / "downstream.csv");
    stamp(csv, cfg, cfg.plan.seed);
    csv << "mode,folds_added,mean_auroc,ci95";
    for (size_t r = 0; r < cfg.plan.repetitions; ++r) csv << ",rep" << r;
    csv << "\n";
    const char* mode = cfg.plan.mode == FoldMixPlan::Mode::augment ? "augment" : "substitute";
    for (const auto& cell : cells) {
        csv << mode << "," << cell.folds_added << "," << fmt(cell.mean) << "," << fmt(cell.ci95);
        for (double v : cell.values) csv << "," << fmt(v);
        csv << "\n";
    }
    std::cout << "downstream (" << mode << "): AUROC " << cells.front().mean << " ("
              << cells.front().folds_added << " folds) .. " << cells.back().mean << " ("
              << cells.back().folds_added << " folds)\n";
}

void cmd_report(const RunConfig& cfg, const fs::path& dir) {
    json rep = stamp_json(cfg, cfg.train.seed);
    auto merge = [&](const char* name, const char* key) {
        fs::path p = dir / name;
        if (!fs::exists(p)) return;
        std::ifstream in(p);
        json j;
        in >> j;
        rep[key] = j;
    };
    merge("eval_summary.json", "fidelity");
    merge("privacy_summary.json", "privacy");
    json artifacts = json::array();
    for (const auto& e : fs::directory_iterator(dir)) artifacts.push_back(e.path().filename());
    std::sort(artifacts.begin(), artifacts.end());
    rep["artifacts"] = artifacts;
    std::ofstream out(dir / "report.json");
    out << rep.dump(1) << "\n";
    std::cout << "report written to " << (dir / "report.json") << "\n";
}

void cmd_spectro_dump(const RunConfig& cfg, const fs::path& dir, size_t record, size_t lead,
                      size_t window) {
    Dataset ds = load_required_dataset(dir, "dataset");
    if (record >= ds.size()) throw ConfigError("--record index out of range");
    const LeadSet& x = ds.records[record].leads;
    if (lead >= x.n_leads()) throw ConfigError("--lead index out of range");
    STFTResolution res{window, std::max<size_t>(1, window / 4)};
    MelBank bank = mel_filterbank(x.sample_rate_hz, window, std::max<size_t>(1, window / 4),
                                  0.0, x.sample_rate_hz / 2.0);
    Tensor lm = log_mel_spectrogram(x.lead(lead), res, bank, cfg.train.midt.log_floor);
    fs::path p = dir / ("logmel_r" + std::to_string(record) + "_l" + std::to_string(lead) + ".csv");
    write_matrix_csv(lm, p, cfg, cfg.data_seed);
    std::cout << "wrote " << p << " (" << lm.rows() << " frames x " << lm.cols() << " mel bins)\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"midt: conditional multi-lead signal synthesis with spectral training"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand name

    std::string config_path, out_override;
    bool have_seed = false;
    uint64_t seed_override = 0;
    app.add_option("--config", config_path, "path to the JSON run config")->required();
    app.add_option("--out", out_override, "override the output directory");
    app.add_option("--seed", seed_override, "override the active command's seed")
        ->each([&](const std::string&) { have_seed = true; });

    auto* c_gen = app.add_subcommand("gen-data", "generate the oracle dataset");
    long export_record = -1;
    c_gen->add_option("--export-record", export_record, "also export record <i> as CSV");
    auto* c_train = app.add_subcommand("train", "train the denoiser");
    auto* c_sample = app.add_subcommand("sample", "draw synthetic records from a checkpoint");
    auto* c_eval = app.add_subcommand("eval", "fidelity and correlation reports");
    auto* c_priv = app.add_subcommand("privacy", "membership-inference and NNAA report");
    auto* c_down = app.add_subcommand("downstream", "fold-mix AUROC experiment");
    auto* c_rep = app.add_subcommand("report", "aggregate summary of existing artifacts");
    auto* c_spec = app.add_subcommand("spectro", "spectrogram utilities");
    auto* c_dump = c_spec->add_subcommand("dump", "write a log-mel matrix as CSV");
    size_t dump_record = 0, dump_lead = 0, dump_window = 32;
    c_dump->add_option("--record", dump_record, "record index");
    c_dump->add_option("--lead", dump_lead, "lead index");
    c_dump->add_option("--window", dump_window, "STFT window length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = parse_run_config(config_path);
        if (have_seed) {
            cfg.data_seed = cfg.train.seed = cfg.sample_seed = cfg.privacy_seed =
                cfg.plan.seed = seed_override;
        }
        fs::path dir = run_dir(cfg, out_override);

        if (c_gen->parsed()) cmd_gen_data(cfg, dir, export_record);
        if (c_train->parsed()) cmd_train(cfg, dir);
        if (c_sample->parsed()) cmd_sample(cfg, dir);
        if (c_eval->parsed()) cmd_eval(cfg, dir);
        if (c_priv->parsed()) cmd_privacy(cfg, dir);
        if (c_down->parsed()) cmd_downstream(cfg, dir);
        if (c_rep->parsed()) cmd_report(cfg, dir);
        if (c_spec->parsed() && c_dump->parsed()) cmd_spectro_dump(cfg, dir, dump_record, dump_lead, dump_window);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        if (msg.find("non-finite") != std::string::npos) return 3;
        if (msg.find("cannot open") != std::string::npos) return 2;
        return 1;
    }
    return 0;
}
