#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "midt/rng.hpp"
#include "midt/tensor.hpp"

namespace midt {

enum class Gender { male, female };

// One multi-lead record: samples is an L x C matrix (time-major),
// amplitudes in mV.
struct LeadSet {
    Tensor samples;  // shape {L, C}
    double sample_rate_hz = 100.0;

    size_t length() const { return samples.shape.at(0); }
    size_t n_leads() const { return samples.shape.size() > 1 ? samples.shape[1] : 1; }
    std::vector<double> lead(size_t c) const;
};

struct RecordMeta {
    int64_t patient_id = 0;
    double age_years = 0.0;
    Gender gender = Gender::male;
    std::vector<int> diagnostic_labels;  // sorted, within [0, 40)
    std::vector<int> form_labels;        // within [0, 19)
    std::vector<int> rhythm_labels;      // within [0, 12)
};

struct Record {
    LeadSet leads;
    RecordMeta meta;
    int fold = 1;  // 1..10
};

struct Dataset {
    std::vector<Record> records;

    size_t size() const { return records.size(); }
    bool empty() const { return records.empty(); }
};

bool operator==(const LeadSet& a, const LeadSet& b);
bool operator==(const RecordMeta& a, const RecordMeta& b);
bool operator==(const Record& a, const Record& b);
bool operator==(const Dataset& a, const Dataset& b);

// One waveform regime of the parametric generator. Class label index doubles
// as the diagnostic label carried in the metadata.
struct ClassRegime {
    std::string name = "normal";
    double qrs_width_scale = 1.0;   // widens Q/R/S bumps ("wideQRS": 2.0)
    double amplitude_scale = 1.0;   // overall voltage ("lowVolt": 0.4)
    double t_amplitude_scale = 1.0;
};

// Parametric stand-in for a clinical corpus: k latent P-QRS-T Gaussian-bump
// trains mixed into C leads by a fixed full-column-rank matrix, plus white
// noise. Everything is a pure function of (config, seed).
struct OracleConfig {
    size_t n_records = 200;
    size_t n_leads = 12;
    size_t length = 256;
    double sample_rate_hz = 100.0;
    size_t latent_sources = 3;
    Tensor mixing;  // {n_leads, latent_sources}; empty -> deterministic default
    double noise_std = 0.02;
    double heart_rate_min_bpm = 55.0;
    double heart_rate_max_bpm = 90.0;
    std::vector<ClassRegime> classes;  // empty -> {normal, wideQRS, lowVolt}
    int n_folds = 10;

    std::vector<ClassRegime> effective_classes() const;
    Tensor effective_mixing() const;
};

// Latent bump trains for record `index` (exposed so tests can reconstruct the
// pre-mixing sources and derive the analytic lead covariance).
std::vector<std::vector<double>> oracle_latents(const OracleConfig& cfg, size_t index, uint64_t seed);

Record make_oracle_record(const OracleConfig& cfg, size_t index, uint64_t seed);
Dataset make_oracle_dataset(const OracleConfig& cfg, uint64_t seed);

// All records whose fold is in `folds`, preserving order.
Dataset subset_by_folds(const Dataset& ds, const std::vector<int>& folds);

struct SplitResult {
    Dataset train, val, test;
};
SplitResult patient_split(const Dataset& ds, const std::vector<int>& train_folds,
                          int val_fold, int test_fold);

// On-disk format: `<path>` is a structured-text (JSON) sidecar holding magic
// "MIDT", format version, record count and all metadata; `<path>.bin` is the
// sample payload as little-endian 32-bit floats, record-major then row-major.
// Amplitudes are quantized to 32-bit floats at save.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

void write_record_csv(const Record& rec, const std::string& path);

}  // namespace midt
