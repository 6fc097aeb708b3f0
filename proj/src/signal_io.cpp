#include "midt/signal_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

namespace midt {

using nlohmann::json;

std::vector<double> LeadSet::lead(size_t c) const {
    size_t L = length(), C = n_leads();
    if (c >= C) throw Error("LeadSet: lead index out of range");
    std::vector<double> out(L);
    for (size_t t = 0; t < L; ++t) out[t] = samples.data[t * C + c];
    return out;
}

bool operator==(const LeadSet& a, const LeadSet& b) {
    return a.sample_rate_hz == b.sample_rate_hz && a.samples.shape == b.samples.shape &&
           a.samples.data == b.samples.data;
}
bool operator==(const RecordMeta& a, const RecordMeta& b) {
    return a.patient_id == b.patient_id && a.age_years == b.age_years && a.gender == b.gender &&
           a.diagnostic_labels == b.diagnostic_labels && a.form_labels == b.form_labels &&
           a.rhythm_labels == b.rhythm_labels;
}
bool operator==(const Record& a, const Record& b) {
    return a.leads == b.leads && a.meta == b.meta && a.fold == b.fold;
}
bool operator==(const Dataset& a, const Dataset& b) { return a.records == b.records; }

std::vector<ClassRegime> OracleConfig::effective_classes() const {
    if (!classes.empty()) return classes;
    return {
        {"normal", 1.0, 1.0, 1.0},
        {"wideQRS", 2.0, 1.0, 1.0},
        {"lowVolt", 1.0, 0.4, 1.0},
    };
}

Tensor OracleConfig::effective_mixing() const {
    if (!mixing.data.empty()) {
        if (mixing.shape != std::vector<size_t>{n_leads, latent_sources})
            throw Error("OracleConfig: mixing matrix shape must be n_leads x latent_sources");
        return mixing;
    }
    Tensor M = Tensor::zeros({n_leads, latent_sources});
    for (size_t c = 0; c < n_leads; ++c)
        for (size_t j = 0; j < latent_sources; ++j)
            M.data[c * latent_sources + j] =
                (c % latent_sources == j ? 1.0 : 0.0) + 0.6 * std::sin(0.9 * double((c + 1) * (j + 1)));
    return M;
}

namespace {

// Full column rank check via Gaussian elimination on M^T M.
bool full_column_rank(const Tensor& M) {
    size_t C = M.shape[0], k = M.shape[1];
    if (C < k) return false;
    std::vector<double> g(k * k, 0.0);
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < k; ++j) {
            double s = 0.0;
            for (size_t c = 0; c < C; ++c) s += M.data[c * k + i] * M.data[c * k + j];
            g[i * k + j] = s;
        }
    double scale = 0.0;
    for (double v : g) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) return false;
    for (size_t p = 0; p < k; ++p) {
        size_t piv = p;
        for (size_t r = p + 1; r < k; ++r)
            if (std::fabs(g[r * k + p]) > std::fabs(g[piv * k + p])) piv = r;
        if (std::fabs(g[piv * k + p]) < 1e-10 * scale) return false;
        if (piv != p)
            for (size_t j = 0; j < k; ++j) std::swap(g[p * k + j], g[piv * k + j]);
        for (size_t r = p + 1; r < k; ++r) {
            double f = g[r * k + p] / g[p * k + p];
            for (size_t j = p; j < k; ++j) g[r * k + j] -= f * g[p * k + j];
        }
    }
    return true;
}

struct Bump {
    double center_s, sigma_s, amp;
};

void add_bumps(std::vector<double>& x, double fs, double beat_center_s,
               const std::vector<Bump>& bumps) {
    for (const Bump& b : bumps) {
        double c = beat_center_s + b.center_s;
        double s2 = 2.0 * b.sigma_s * b.sigma_s;
        long lo = long(std::floor((c - 5.0 * b.sigma_s) * fs));
        long hi = long(std::ceil((c + 5.0 * b.sigma_s) * fs));
        lo = std::max(lo, 0L);
        hi = std::min(hi, long(x.size()) - 1);
        for (long t = lo; t <= hi; ++t) {
            double dt = double(t) / fs - c;
            x[size_t(t)] += b.amp * std::exp(-dt * dt / s2);
        }
    }
}

}  // namespace

std::vector<std::vector<double>> oracle_latents(const OracleConfig& cfg, size_t index, uint64_t seed) {
    Rng rec_rng = Rng(seed).fork(index);
    auto classes = cfg.effective_classes();
    const ClassRegime& reg = classes[index % classes.size()];

    double hr = cfg.heart_rate_min_bpm +
                rec_rng.uniform() * (cfg.heart_rate_max_bpm - cfg.heart_rate_min_bpm);
    double period_s = 60.0 / hr;
    double duration_s = double(cfg.length) / cfg.sample_rate_hz;
    double phase0 = rec_rng.uniform() * period_s;

    std::vector<std::vector<double>> latents(cfg.latent_sources);
    for (size_t j = 0; j < cfg.latent_sources; ++j) {
        std::vector<double>& x = latents[j];
        x.assign(cfg.length, 0.0);
        double phase_jitter = (rec_rng.uniform() - 0.5) * 0.06;  // seconds
        double amp_jitter = 1.0 + 0.1 * rec_rng.normal();
        double a = reg.amplitude_scale * amp_jitter;
        double w = reg.qrs_width_scale;
        std::vector<Bump> beat = {
            {-0.16, 0.025, 0.15 * a},           // P
            {-0.04, 0.012 * w, -0.20 * a},      // Q
            {0.00, 0.018 * w, 1.00 * a},        // R
            {0.04, 0.012 * w, -0.25 * a},       // S
            {0.24, 0.050, 0.35 * a * reg.t_amplitude_scale},  // T
        };
        for (double tc = phase0 + phase_jitter; tc < duration_s + 0.5; tc += period_s)
            add_bumps(x, cfg.sample_rate_hz, tc, beat);
    }
    return latents;
}

Record make_oracle_record(const OracleConfig& cfg, size_t index, uint64_t seed) {
    auto latents = oracle_latents(cfg, index, seed);
    Tensor M = cfg.effective_mixing();
    size_t C = cfg.n_leads, k = cfg.latent_sources, L = cfg.length;

    // noise and metadata draw from streams independent of the latent stream,
    // so oracle_latents() reproduces the sources exactly
    Rng noise_rng = Rng(seed).fork(index ^ 0x6E6F697365ULL);
    Rng meta_rng = Rng(seed).fork(index ^ 0x6D657461ULL);

    Record rec;
    rec.leads.sample_rate_hz = cfg.sample_rate_hz;
    rec.leads.samples = Tensor::zeros({L, C});
    for (size_t t = 0; t < L; ++t)
        for (size_t c = 0; c < C; ++c) {
            double v = 0.0;
            for (size_t j = 0; j < k; ++j) v += M.data[c * k + j] * latents[j][t];
            if (cfg.noise_std > 0.0) v += cfg.noise_std * noise_rng.normal();
            rec.leads.samples.data[t * C + c] = v;
        }

    auto classes = cfg.effective_classes();
    rec.meta.patient_id = int64_t(index);
    rec.meta.age_years = std::floor(meta_rng.uniform() * 96.0);
    rec.meta.gender = meta_rng.uniform() < 0.5 ? Gender::male : Gender::female;
    rec.meta.diagnostic_labels = {int(index % classes.size())};
    if (meta_rng.uniform() < 0.3) rec.meta.form_labels = {int(meta_rng.uniform_int(19))};
    if (meta_rng.uniform() < 0.3) rec.meta.rhythm_labels = {int(meta_rng.uniform_int(12))};
    rec.fold = int(index % size_t(cfg.n_folds)) + 1;
    return rec;
}

Dataset make_oracle_dataset(const OracleConfig& cfg, uint64_t seed) {
    if (cfg.noise_std < 0.0) throw Error("OracleConfig: noise_std must be >= 0");
    if (cfg.length < 16) throw Error("OracleConfig: length must be >= 16");
    if (!full_column_rank(cfg.effective_mixing()))
        throw Error("OracleConfig: mixing matrix is rank-deficient");
    Dataset ds;
    ds.records.reserve(cfg.n_records);
    for (size_t i = 0; i < cfg.n_records; ++i)
        ds.records.push_back(make_oracle_record(cfg, i, seed));
    return ds;
}

Dataset subset_by_folds(const Dataset& ds, const std::vector<int>& folds) {
    std::set<int> want(folds.begin(), folds.end());
    Dataset out;
    for (const Record& r : ds.records)
        if (want.count(r.fold)) out.records.push_back(r);
    return out;
}

SplitResult patient_split(const Dataset& ds, const std::vector<int>& train_folds,
                          int val_fold, int test_fold) {
    std::set<int> train(train_folds.begin(), train_folds.end());
    if (train.count(val_fold) || train.count(test_fold) || val_fold == test_fold)
        throw Error("patient_split: fold sets overlap");
    SplitResult out;
    out.train = subset_by_folds(ds, train_folds);
    out.val = subset_by_folds(ds, {val_fold});
    out.test = subset_by_folds(ds, {test_fold});
    return out;
}

static const char* gender_str(Gender g) { return g == Gender::male ? "male" : "female"; }
static Gender gender_from(const std::string& s) {
    if (s == "male") return Gender::male;
    if (s == "female") return Gender::female;
    throw Error("dataset: malformed header (bad gender '" + s + "')");
}

void write_dataset(const Dataset& ds, const std::string& path) {
    size_t L = 0, C = 0;
    double fs = 100.0;
    if (!ds.empty()) {
        L = ds.records[0].leads.length();
        C = ds.records[0].leads.n_leads();
        fs = ds.records[0].leads.sample_rate_hz;
        for (const Record& r : ds.records)
            if (r.leads.length() != L || r.leads.n_leads() != C || r.leads.sample_rate_hz != fs)
                throw Error("write_dataset: records must share shape and sample rate");
    }

    json hdr;
    hdr["magic"] = "MIDT";
    hdr["version"] = 1;
    hdr["record_count"] = ds.size();
    hdr["length"] = L;
    hdr["n_leads"] = C;
    hdr["sample_rate_hz"] = fs;
    json recs = json::array();
    for (const Record& r : ds.records) {
        json m;
        m["patient_id"] = r.meta.patient_id;
        m["age_years"] = r.meta.age_years;
        m["gender"] = gender_str(r.meta.gender);
        m["diagnostic"] = r.meta.diagnostic_labels;
        m["form"] = r.meta.form_labels;
        m["rhythm"] = r.meta.rhythm_labels;
        m["fold"] = r.fold;
        recs.push_back(std::move(m));
    }
    hdr["records"] = std::move(recs);

    std::ofstream hout(path);
    if (!hout) throw Error("write_dataset: cannot open '" + path + "'");
    hout << hdr.dump(1) << "\n";

    std::ofstream bout(path + ".bin", std::ios::binary);
    if (!bout) throw Error("write_dataset: cannot open '" + path + ".bin'");
    for (const Record& r : ds.records)
        for (double v : r.leads.samples.data) {
            float f = float(v);
            char bytes[4];
            std::memcpy(bytes, &f, 4);  // little-endian host assumed
            bout.write(bytes, 4);
        }
}

Dataset read_dataset(const std::string& path) {
    std::ifstream hin(path);
    if (!hin) throw Error("read_dataset: cannot open '" + path + "'");
    json hdr;
    try {
        hin >> hdr;
    } catch (const json::exception& e) {
        throw Error("read_dataset: malformed header: " + std::string(e.what()));
    }
    if (!hdr.contains("magic") || hdr["magic"] != "MIDT")
        throw Error("read_dataset: bad magic (expected \"MIDT\")");
    if (!hdr.contains("version") || hdr["version"] != 1)
        throw Error("read_dataset: unsupported format version");

    size_t n, L, C;
    double fs;
    try {
        n = hdr.at("record_count").get<size_t>();
        L = hdr.at("length").get<size_t>();
        C = hdr.at("n_leads").get<size_t>();
        fs = hdr.at("sample_rate_hz").get<double>();
    } catch (const json::exception& e) {
        throw Error("read_dataset: malformed header: " + std::string(e.what()));
    }
    if (hdr.at("records").size() != n)
        throw Error("read_dataset: malformed header: record list length != record_count");

    std::ifstream bin(path + ".bin", std::ios::binary);
    if (!bin) throw Error("read_dataset: cannot open '" + path + ".bin'");
    bin.seekg(0, std::ios::end);
    size_t bytes = size_t(bin.tellg());
    bin.seekg(0);
    if (bytes != n * L * C * 4)
        throw Error("read_dataset: payload length mismatch (have " + std::to_string(bytes) +
                    " bytes, need " + std::to_string(n * L * C * 4) + ")");

    Dataset ds;
    ds.records.reserve(n);
    std::vector<char> buf(L * C * 4);
    for (size_t i = 0; i < n; ++i) {
        const json& m = hdr["records"][i];
        Record r;
        try {
            r.meta.patient_id = m.at("patient_id").get<int64_t>();
            r.meta.age_years = m.at("age_years").get<double>();
            r.meta.gender = gender_from(m.at("gender").get<std::string>());
            r.meta.diagnostic_labels = m.at("diagnostic").get<std::vector<int>>();
            r.meta.form_labels = m.at("form").get<std::vector<int>>();
            r.meta.rhythm_labels = m.at("rhythm").get<std::vector<int>>();
            r.fold = m.at("fold").get<int>();
        } catch (const json::exception& e) {
            throw Error("read_dataset: malformed header: " + std::string(e.what()));
        }
        bin.read(buf.data(), std::streamsize(buf.size()));
        if (!bin) throw Error("read_dataset: payload length mismatch (truncated)");
        r.leads.sample_rate_hz = fs;
        r.leads.samples = Tensor::zeros({L, C});
        for (size_t j = 0; j < L * C; ++j) {
            float f;
            std::memcpy(&f, &buf[j * 4], 4);
            r.leads.samples.data[j] = double(f);
        }
        ds.records.push_back(std::move(r));
    }
    return ds;
}

void write_record_csv(const Record& rec, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_record_csv: cannot open '" + path + "'");
    size_t L = rec.leads.length(), C = rec.leads.n_leads();
    out << "t_s";
    for (size_t c = 0; c < C; ++c) out << ",lead" << c;
    out << "\n";
    out.precision(10);
    for (size_t t = 0; t < L; ++t) {
        out << double(t) / rec.leads.sample_rate_hz;
        for (size_t c = 0; c < C; ++c) out << "," << rec.leads.samples.data[t * C + c];
        out << "\n";
    }
}

}  // namespace midt
