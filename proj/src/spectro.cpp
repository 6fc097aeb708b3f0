#include "midt/spectro.hpp"

#include <cmath>

namespace midt {

static constexpr double kTwoPi = 6.283185307179586476925287;

MidtConfig MidtConfig::defaults() {
    MidtConfig cfg;
    cfg.resolutions = {{32, 8}, {64, 16}, {128, 32}};
    return cfg;
}

MidtConfig MidtConfig::for_length(size_t L) {
    MidtConfig cfg;
    for (size_t w : {32, 64, 128})
        if (w <= L) cfg.resolutions.push_back({w, w / 4});
    while (cfg.resolutions.size() < 2) {
        size_t w = cfg.resolutions.empty() ? 16 : cfg.resolutions.front().window_length / 2;
        if (w < 4 || w > L) throw Error("MidtConfig: signal too short for two resolutions");
        cfg.resolutions.insert(cfg.resolutions.begin(), {w, w / 4});
    }
    return cfg;
}

void MidtConfig::validate(size_t L) const {
    if (resolutions.size() < 2) throw Error("MidtConfig: need at least 2 resolutions");
    for (const auto& r : resolutions) {
        if (r.hop_length < 1 || r.hop_length > r.window_length)
            throw Error("MidtConfig: hop must be in (0, window]");
        if (r.window_length > L)
            throw Error("MidtConfig: window " + std::to_string(r.window_length) +
                        " exceeds signal length " + std::to_string(L));
    }
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

MelBank mel_filterbank(double sample_rate_hz, size_t window_length, size_t n_mels,
                       double f_min_hz, double f_max_hz) {
    double nyquist = sample_rate_hz / 2.0;
    if (n_mels < 1) throw Error("mel_filterbank: n_mels must be >= 1");
    if (!(f_min_hz < f_max_hz)) throw Error("mel_filterbank: need f_min < f_max");
    if (f_max_hz > nyquist + 1e-12) throw Error("mel_filterbank: f_max exceeds Nyquist");

    size_t bins = window_length / 2 + 1;
    double m_lo = hz_to_mel(f_min_hz), m_hi = hz_to_mel(f_max_hz);
    std::vector<double> edges(n_mels + 2);
    for (size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * double(i) / double(n_mels + 1));

    MelBank bank;
    bank.n_mels = n_mels;
    bank.f_min_hz = f_min_hz;
    bank.f_max_hz = f_max_hz;
    bank.sample_rate_hz = sample_rate_hz;
    bank.weights = Tensor::zeros({n_mels, bins});
    for (size_t m = 0; m < n_mels; ++m) {
        double lo = edges[m], c = edges[m + 1], hi = edges[m + 2];
        double peak = 0.0;
        for (size_t b = 0; b < bins; ++b) {
            double f = double(b) * sample_rate_hz / double(window_length);
            double w = 0.0;
            if (f > lo && f < c)
                w = (f - lo) / (c - lo);
            else if (f >= c && f < hi)
                w = (hi - f) / (hi - c);
            else if (f == c)
                w = 1.0;
            bank.weights.data[m * bins + b] = w;
            peak = std::max(peak, w);
        }
        if (peak == 0.0) {
            // filter narrower than the bin spacing: assign the nearest bin
            size_t b = size_t(std::llround(c * double(window_length) / sample_rate_hz));
            b = std::min(b, bins - 1);
            bank.weights.data[m * bins + b] = 1.0;
        } else {
            for (size_t b = 0; b < bins; ++b) bank.weights.data[m * bins + b] /= peak;
        }
    }
    return bank;
}

static std::vector<double> make_window(size_t W, WindowKind kind) {
    std::vector<double> w(W, 1.0);
    if (kind == WindowKind::hann)
        for (size_t n = 0; n < W; ++n) w[n] = 0.5 - 0.5 * std::cos(kTwoPi * double(n) / double(W));
    return w;
}

Tensor Spectrogram::magnitude() const {
    Tensor m = Tensor::zeros(re.shape);
    for (size_t i = 0; i < m.size(); ++i)
        m.data[i] = std::hypot(re.data[i], im.data[i]);
    return m;
}

Spectrogram stft(const std::vector<double>& x, const STFTResolution& res, WindowKind window) {
    size_t W = res.window_length, hop = res.hop_length, L = x.size();
    if (L < W) throw Error("stft: signal length " + std::to_string(L) + " < window " + std::to_string(W));
    if (hop < 1 || hop > W) throw Error("stft: hop must be in (0, window]");
    size_t F = (L - W) / hop + 1;
    size_t bins = W / 2 + 1;
    auto win = make_window(W, window);
    double scale = 1.0 / std::sqrt(double(W));

    Spectrogram out;
    out.re = Tensor::zeros({F, bins});
    out.im = Tensor::zeros({F, bins});
    for (size_t f = 0; f < F; ++f) {
        for (size_t b = 0; b < bins; ++b) {
            double re = 0.0, im = 0.0;
            for (size_t n = 0; n < W; ++n) {
                double v = x[f * hop + n] * win[n];
                double ang = -kTwoPi * double(b) * double(n) / double(W);
                re += v * std::cos(ang);
                im += v * std::sin(ang);
            }
            out.re.data[f * bins + b] = re * scale;
            out.im.data[f * bins + b] = im * scale;
        }
    }
    return out;
}

Tensor log_mel_spectrogram(const std::vector<double>& x, const STFTResolution& res,
                           const MelBank& bank, double floor) {
    Spectrogram s = stft(x, res);
    Tensor mag = s.magnitude();
    size_t F = mag.shape[0], bins = mag.shape[1], M = bank.n_mels;
    if (bank.weights.shape[1] != bins) throw Error("log_mel_spectrogram: bank/window mismatch");
    Tensor out = Tensor::zeros({F, M});
    for (size_t f = 0; f < F; ++f)
        for (size_t m = 0; m < M; ++m) {
            double s2 = 0.0;
            for (size_t b = 0; b < bins; ++b)
                s2 += bank.weights.data[m * bins + b] * mag.data[f * bins + b];
            out.data[f * M + m] = std::log(std::max(s2, floor));
        }
    return out;
}

static MelBank default_bank(const STFTResolution& res, double fs) {
    size_t n_mels = std::max<size_t>(1, res.window_length / 4);
    return mel_filterbank(fs, res.window_length, n_mels, 0.0, fs / 2.0);
}

double midt_loss(const LeadSet& x_hat, const LeadSet& x, const MidtConfig& cfg) {
    if (x_hat.samples.shape != x.samples.shape)
        throw Error("midt_loss: shape mismatch " + x_hat.samples.shape_str() + " vs " +
                    x.samples.shape_str());
    cfg.validate(x.length());
    double total = 0.0;
    for (const auto& res : cfg.resolutions) {
        MelBank bank = default_bank(res, x.sample_rate_hz);
        double acc = 0.0;
        size_t count = 0;
        for (size_t c = 0; c < x.n_leads(); ++c) {
            Tensor a = log_mel_spectrogram(x_hat.lead(c), res, bank, cfg.log_floor);
            Tensor b = log_mel_spectrogram(x.lead(c), res, bank, cfg.log_floor);
            for (size_t i = 0; i < a.size(); ++i) acc += std::fabs(a.data[i] - b.data[i]);
            count += a.size();
        }
        total += acc / double(count);
    }
    return total / double(cfg.resolutions.size());
}

// --- graph builders ---

int log_mel_node(Graph& g, int lead_node, const STFTResolution& res, const MelBank& bank,
                 double floor) {
    size_t W = res.window_length, hop = res.hop_length;
    size_t L = g.value(lead_node).size();
    if (L < W) throw Error("log_mel_node: signal length < window");
    size_t F = (L - W) / hop + 1;
    size_t bins = W / 2 + 1;

    auto win = make_window(W, WindowKind::hann);
    Tensor win_tile = Tensor::zeros({F, W});
    for (size_t f = 0; f < F; ++f)
        for (size_t n = 0; n < W; ++n) win_tile.data[f * W + n] = win[n];

    double scale = 1.0 / std::sqrt(double(W));
    Tensor cos_m = Tensor::zeros({W, bins}), sin_m = Tensor::zeros({W, bins});
    for (size_t n = 0; n < W; ++n)
        for (size_t b = 0; b < bins; ++b) {
            double ang = -kTwoPi * double(b) * double(n) / double(W);
            cos_m.data[n * bins + b] = std::cos(ang) * scale;
            sin_m.data[n * bins + b] = std::sin(ang) * scale;
        }
    Tensor mel_t = Tensor::zeros({bins, bank.n_mels});  // bank^T
    for (size_t m = 0; m < bank.n_mels; ++m)
        for (size_t b = 0; b < bins; ++b)
            mel_t.data[b * bank.n_mels + m] = bank.weights.data[m * bins + b];

    int frames = g.mul(g.frame(lead_node, W, hop), g.constant(win_tile));
    int re = g.matmul(frames, g.constant(cos_m));
    int im = g.matmul(frames, g.constant(sin_m));
    int mag = g.sqrt_floor(g.add(g.square(re), g.square(im)), 1e-12);
    return g.log_floor(g.matmul(mag, g.constant(mel_t)), floor);
}

int midt_loss_node(Graph& g, int x_hat_node, const LeadSet& x, const MidtConfig& cfg) {
    size_t C = x.n_leads(), L = x.length();
    if (g.value(x_hat_node).shape != std::vector<size_t>{C, L})
        throw Error("midt_loss_node: x_hat node must have shape {C, L}");
    cfg.validate(L);

    int total = -1;
    for (const auto& res : cfg.resolutions) {
        MelBank bank = default_bank(res, x.sample_rate_hz);
        int cat = -1;
        for (size_t c = 0; c < C; ++c) {
            int lead = g.slice(x_hat_node, c * L, L);
            int lm_hat = log_mel_node(g, lead, res, bank, cfg.log_floor);
            int lm_ref = g.constant(log_mel_spectrogram(x.lead(c), res, bank, cfg.log_floor));
            int diff = g.abs_(g.sub(lm_hat, lm_ref));
            size_t n = g.value(diff).size();
            int flat = g.reshape(diff, {n});
            cat = cat < 0 ? flat : g.concat(cat, flat);
        }
        int res_mean = g.mean(cat);
        total = total < 0 ? res_mean : g.add(total, res_mean);
    }
    return g.scale(total, 1.0 / double(cfg.resolutions.size()));
}

}  // namespace midt
