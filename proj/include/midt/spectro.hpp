#pragma once

#include <vector>

#include "midt/graph.hpp"
#include "midt/signal_io.hpp"
#include "midt/tensor.hpp"

namespace midt {

enum class WindowKind { hann, rect };

struct STFTResolution {
    size_t window_length = 64;  // power of two
    size_t hop_length = 16;
};

struct MelBank {
    size_t n_mels = 0;
    double f_min_hz = 0.0, f_max_hz = 0.0, sample_rate_hz = 0.0;
    Tensor weights;  // {n_mels, window/2 + 1}, rows peak-normalized to 1
};

// Multi-resolution loss configuration. Mel banks use n_mels = window/4,
// f_min = 0, f_max = Nyquist; magnitudes (not power) feed the banks.
struct MidtConfig {
    std::vector<STFTResolution> resolutions;
    double log_floor = 1e-5;

    static MidtConfig defaults();       // windows 32/64/128, hop = window/4
    static MidtConfig for_length(size_t signal_length);  // windows capped to fit
    void validate(size_t signal_length) const;
};

double hz_to_mel(double f);
double mel_to_hz(double m);

MelBank mel_filterbank(double sample_rate_hz, size_t window_length, size_t n_mels,
                       double f_min_hz, double f_max_hz);

struct Spectrogram {
    Tensor re, im;  // {frames, window/2 + 1}, orthonormal 1/sqrt(window) scaling
    Tensor magnitude() const;
};

// Windowed framewise real DFT, no padding: frames = (L - window)/hop + 1.
Spectrogram stft(const std::vector<double>& x, const STFTResolution& res,
                 WindowKind window = WindowKind::hann);

Tensor log_mel_spectrogram(const std::vector<double>& x, const STFTResolution& res,
                           const MelBank& bank, double floor);

// L1 distance between multi-resolution log-mel spectrograms, averaged per
// resolution over (leads, frames, mel bins), then across resolutions.
double midt_loss(const LeadSet& x_hat, const LeadSet& x, const MidtConfig& cfg);

// --- differentiable versions (built into a compute graph) ---

// lead_node: rank-1 node of length L
int log_mel_node(Graph& g, int lead_node, const STFTResolution& res, const MelBank& bank,
                 double floor);

// x_hat_node: node of shape {C, L} (channels-major); x is the reference.
int midt_loss_node(Graph& g, int x_hat_node, const LeadSet& x, const MidtConfig& cfg);

}  // namespace midt
