#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "midt/signal_io.hpp"
#include "midt/tensor.hpp"

namespace midt {

// Version tag embedded in every report: several metric definitions have
// implementation-pinned details, so numbers are comparable only within one
// version.
inline constexpr const char* kMetricsVersion = "midt-metrics-1";

struct Fidelity {
    double rmse = 0.0;
    double mse = 0.0;
    std::optional<double> snr_db;  // absent when the residual is exactly zero
};

// mse/rmse over all samples and leads; snr in dB with x as the reference.
Fidelity pointwise_fidelity(const LeadSet& x, const LeadSet& y);

// RMS difference of orthonormal full-DFT magnitude spectra (phase-invariant;
// never exceeds rmse, by Parseval).
double fourier_distance(const LeadSet& x, const LeadSet& y);

// Symmetric Hausdorff distance between the planar point sets
// {(i/(L-1), value_i)} of each lead, averaged over leads.
double hausdorff_distance(const LeadSet& x, const LeadSet& y);

// Sliding-window SSIM per lead, averaged over windows and leads.
// l_range is the dynamic range of the reference data.
double ssim_1d(const LeadSet& x, const LeadSet& y, size_t window, size_t stride,
               double l_range, double k1 = 0.01, double k2 = 0.03);

// Pearson correlation between lead channels over all concatenated records.
Tensor corr_matrix(const std::vector<LeadSet>& records);

// (avg_abs, max_abs) over the C(C-1)/2 unordered off-diagonal pairs.
std::pair<double, double> corr_error(const Tensor& real_m, const Tensor& synth_m);

// Flags values above Q3 + 3*IQR; quartiles by linear interpolation on the
// sorted values at position q*(n-1).
std::vector<bool> outlier_flags(const std::vector<double>& values);

// Per-record distance used by the privacy metrics.
double record_rmse(const LeadSet& a, const LeadSet& b);

// Membership inference risk: best-threshold advantage (TPR - FPR) of an
// attacker predicting "training member" when the distance to the nearest
// synthetic record is below the threshold. Clamped to [0, 1].
double mir(const std::vector<LeadSet>& train, const std::vector<LeadSet>& holdout,
           const std::vector<LeadSet>& synth);

// Nearest-neighbor adversarial accuracy gap:
//   AA(A,S) = 1/2 [ mean 1{d_AS(i) > d_AA(i)} + mean 1{d_SA(j) > d_SS(j)} ]
//   nnaa    = AA(holdout, synth) - AA(train, synth)
// Within-set distances are leave-one-out. Negative values are possible.
double nnaa(const std::vector<LeadSet>& train, const std::vector<LeadSet>& holdout,
            const std::vector<LeadSet>& synth);

struct PrivacyReport {
    double mir = 0.0;
    double nnaa = 0.0;
    double mean_nn_train = 0.0;    // mean nearest-synthetic distance from train
    double mean_nn_holdout = 0.0;  // same from holdout
};
PrivacyReport privacy_report(const std::vector<LeadSet>& train,
                             const std::vector<LeadSet>& holdout,
                             const std::vector<LeadSet>& synth);

}  // namespace midt
