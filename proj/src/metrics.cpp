#include "midt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <thread>

namespace midt {

static void check_same_shape(const LeadSet& x, const LeadSet& y, const char* fn) {
    if (x.samples.shape != y.samples.shape)
        throw Error(std::string(fn) + ": shape mismatch " + x.samples.shape_str() + " vs " +
                    y.samples.shape_str());
}

// MIDT_THREADS caps parallelism; per-index writes keep results independent
// of the thread count.
static void parallel_for(size_t n, const std::function<void(size_t)>& fn) {
    size_t threads = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("MIDT_THREADS"))
        threads = size_t(std::max(1L, std::atol(env)));
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (size_t i = w; i < n; i += threads) fn(i);
        });
    for (auto& t : pool) t.join();
}

Fidelity pointwise_fidelity(const LeadSet& x, const LeadSet& y) {
    check_same_shape(x, y, "pointwise_fidelity");
    Fidelity f;
    double ref_energy = 0.0, res_energy = 0.0;
    for (size_t i = 0; i < x.samples.size(); ++i) {
        double d = x.samples.data[i] - y.samples.data[i];
        res_energy += d * d;
        ref_energy += x.samples.data[i] * x.samples.data[i];
    }
    f.mse = res_energy / double(x.samples.size());
    f.rmse = std::sqrt(f.mse);
    if (res_energy > 0.0) f.snr_db = 10.0 * std::log10(ref_energy / res_energy);
    return f;
}

static std::vector<double> dft_magnitudes(const std::vector<double>& x) {
    size_t L = x.size();
    double scale = 1.0 / std::sqrt(double(L));
    std::vector<double> mag(L);
    for (size_t k = 0; k < L; ++k) {
        double re = 0.0, im = 0.0;
        for (size_t n = 0; n < L; ++n) {
            double ang = -6.283185307179586 * double(k) * double(n) / double(L);
            re += x[n] * std::cos(ang);
            im += x[n] * std::sin(ang);
        }
        mag[k] = std::hypot(re * scale, im * scale);
    }
    return mag;
}

double fourier_distance(const LeadSet& x, const LeadSet& y) {
    check_same_shape(x, y, "fourier_distance");
    double acc = 0.0;
    size_t count = 0;
    for (size_t c = 0; c < x.n_leads(); ++c) {
        auto mx = dft_magnitudes(x.lead(c));
        auto my = dft_magnitudes(y.lead(c));
        for (size_t k = 0; k < mx.size(); ++k) {
            double d = mx[k] - my[k];
            acc += d * d;
        }
        count += mx.size();
    }
    return std::sqrt(acc / double(count));
}

// Directed nearest-neighbor search over time-ordered planar points with
// pruning on the time axis; the O(L^2) double loop lives in the test oracle.
static double directed_hausdorff_sq(const std::vector<double>& a, const std::vector<double>& b,
                                    double dx) {
    size_t n = a.size();
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        // expand outward from index i; once the time gap alone exceeds the
        // current best, no farther point can win
        for (size_t o = 0; o < n; ++o) {
            double tx2 = dx * double(o) * dx * double(o);
            if (o > 0 && tx2 >= best) break;
            if (i + o < n) {
                double dy = a[i] - b[i + o];
                best = std::min(best, tx2 + dy * dy);
            }
            if (o > 0 && i >= o) {
                double dy = a[i] - b[i - o];
                best = std::min(best, tx2 + dy * dy);
            }
        }
        if (best > worst) worst = best;
    }
    return worst;
}

double hausdorff_distance(const LeadSet& x, const LeadSet& y) {
    check_same_shape(x, y, "hausdorff_distance");
    size_t L = x.length();
    double dx = L > 1 ? 1.0 / double(L - 1) : 0.0;
    double acc = 0.0;
    for (size_t c = 0; c < x.n_leads(); ++c) {
        auto a = x.lead(c), b = y.lead(c);
        double h = std::max(directed_hausdorff_sq(a, b, dx), directed_hausdorff_sq(b, a, dx));
        acc += std::sqrt(h);
    }
    return acc / double(x.n_leads());
}

double ssim_1d(const LeadSet& x, const LeadSet& y, size_t window, size_t stride,
               double l_range, double k1, double k2) {
    check_same_shape(x, y, "ssim_1d");
    size_t L = x.length();
    if (L < window) throw Error("ssim_1d: signal shorter than window");
    if (!(l_range > 0.0)) throw Error("ssim_1d: l_range must be > 0");
    double c1 = k1 * l_range * k1 * l_range;
    double c2 = k2 * l_range * k2 * l_range;
    size_t W = window;
    double acc = 0.0;
    size_t count = 0;
    for (size_t c = 0; c < x.n_leads(); ++c) {
        auto a = x.lead(c), b = y.lead(c);
        for (size_t s = 0; s + W <= L; s += stride) {
            double mx = 0.0, my = 0.0;
            for (size_t i = 0; i < W; ++i) {
                mx += a[s + i];
                my += b[s + i];
            }
            mx /= double(W);
            my /= double(W);
            double vx = 0.0, vy = 0.0, cov = 0.0;
            for (size_t i = 0; i < W; ++i) {
                double da = a[s + i] - mx, db = b[s + i] - my;
                vx += da * da;
                vy += db * db;
                cov += da * db;
            }
            vx /= double(W);
            vy /= double(W);
            cov /= double(W);
            acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                   ((mx * mx + my * my + c1) * (vx + vy + c2));
            ++count;
        }
    }
    return acc / double(count);
}

Tensor corr_matrix(const std::vector<LeadSet>& records) {
    if (records.empty()) throw Error("corr_matrix: no records");
    size_t C = records[0].n_leads();
    for (const auto& r : records)
        if (r.n_leads() != C) throw Error("corr_matrix: lead count mismatch");

    size_t n = 0;
    std::vector<double> mean(C, 0.0);
    for (const auto& r : records) {
        size_t L = r.length();
        n += L;
        for (size_t t = 0; t < L; ++t)
            for (size_t c = 0; c < C; ++c) mean[c] += r.samples.data[t * C + c];
    }
    for (auto& m : mean) m /= double(n);

    std::vector<double> cov(C * C, 0.0);
    for (const auto& r : records) {
        size_t L = r.length();
        for (size_t t = 0; t < L; ++t)
            for (size_t i = 0; i < C; ++i) {
                double di = r.samples.data[t * C + i] - mean[i];
                for (size_t j = i; j < C; ++j)
                    cov[i * C + j] += di * (r.samples.data[t * C + j] - mean[j]);
            }
    }
    for (size_t i = 0; i < C; ++i)
        if (cov[i * C + i] <= 0.0)
            throw Error("corr_matrix: lead " + std::to_string(i) + " is constant");

    Tensor out = Tensor::zeros({C, C});
    for (size_t i = 0; i < C; ++i)
        for (size_t j = i; j < C; ++j) {
            double v = i == j ? 1.0
                              : cov[i * C + j] / std::sqrt(cov[i * C + i] * cov[j * C + j]);
            out.data[i * C + j] = v;
            out.data[j * C + i] = v;
        }
    return out;
}

std::pair<double, double> corr_error(const Tensor& real_m, const Tensor& synth_m) {
    if (real_m.shape != synth_m.shape || real_m.rank() != 2 || real_m.shape[0] != real_m.shape[1])
        throw Error("corr_error: need square matrices of equal size");
    size_t C = real_m.shape[0];
    for (size_t i = 0; i < C; ++i)
        for (size_t j = i + 1; j < C; ++j)
            if (std::fabs(real_m.at(i, j) - real_m.at(j, i)) > 1e-9 ||
                std::fabs(synth_m.at(i, j) - synth_m.at(j, i)) > 1e-9)
                throw Error("corr_error: input matrix is not symmetric");
    if (C < 2) throw Error("corr_error: need at least 2 leads");
    double sum = 0.0, mx = 0.0;
    size_t count = 0;
    for (size_t i = 0; i < C; ++i)
        for (size_t j = i + 1; j < C; ++j) {
            double d = std::fabs(real_m.at(i, j) - synth_m.at(i, j));
            sum += d;
            mx = std::max(mx, d);
            ++count;
        }
    return {sum / double(count), mx};
}

static double quantile(const std::vector<double>& sorted, double q) {
    double pos = q * double(sorted.size() - 1);
    size_t lo = size_t(std::floor(pos));
    size_t hi = size_t(std::ceil(pos));
    double frac = pos - double(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

std::vector<bool> outlier_flags(const std::vector<double>& values) {
    if (values.size() < 4) throw Error("outlier_flags: need at least 4 values");
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    double q1 = quantile(sorted, 0.25);
    double q3 = quantile(sorted, 0.75);
    double threshold = q3 + 3.0 * (q3 - q1);
    std::vector<bool> flags(values.size());
    for (size_t i = 0; i < values.size(); ++i) flags[i] = values[i] > threshold;
    return flags;
}

double record_rmse(const LeadSet& a, const LeadSet& b) {
    return pointwise_fidelity(a, b).rmse;
}

static std::vector<double> nn_distances(const std::vector<LeadSet>& from,
                                        const std::vector<LeadSet>& to) {
    std::vector<double> d(from.size());
    parallel_for(from.size(), [&](size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& t : to) best = std::min(best, record_rmse(from[i], t));
        d[i] = best;
    });
    return d;
}

static std::vector<double> loo_distances(const std::vector<LeadSet>& set) {
    std::vector<double> d(set.size());
    parallel_for(set.size(), [&](size_t i) {
        double best = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < set.size(); ++j)
            if (j != i) best = std::min(best, record_rmse(set[i], set[j]));
        d[i] = best;
    });
    return d;
}

double mir(const std::vector<LeadSet>& train, const std::vector<LeadSet>& holdout,
           const std::vector<LeadSet>& synth) {
    if (train.empty() || holdout.empty() || synth.empty()) throw Error("mir: empty record set");
    auto d_tr = nn_distances(train, synth);
    auto d_ho = nn_distances(holdout, synth);
    // sweep thresholds at every observed distance (attack: member iff d <= tau)
    std::vector<double> taus = d_tr;
    taus.insert(taus.end(), d_ho.begin(), d_ho.end());
    std::sort(taus.begin(), taus.end());
    taus.erase(std::unique(taus.begin(), taus.end()), taus.end());
    double best = 0.0;
    for (double tau : taus) {
        double tpr = 0.0, fpr = 0.0;
        for (double d : d_tr) tpr += d <= tau ? 1.0 : 0.0;
        for (double d : d_ho) fpr += d <= tau ? 1.0 : 0.0;
        best = std::max(best, tpr / double(d_tr.size()) - fpr / double(d_ho.size()));
    }
    return std::clamp(best, 0.0, 1.0);
}

static double adversarial_accuracy(const std::vector<LeadSet>& a, const std::vector<LeadSet>& s) {
    auto d_as = nn_distances(a, s);
    auto d_aa = loo_distances(a);
    auto d_sa = nn_distances(s, a);
    auto d_ss = loo_distances(s);
    double acc_a = 0.0, acc_s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc_a += d_as[i] > d_aa[i] ? 1.0 : 0.0;
    for (size_t j = 0; j < s.size(); ++j) acc_s += d_sa[j] > d_ss[j] ? 1.0 : 0.0;
    return 0.5 * (acc_a / double(a.size()) + acc_s / double(s.size()));
}

double nnaa(const std::vector<LeadSet>& train, const std::vector<LeadSet>& holdout,
            const std::vector<LeadSet>& synth) {
    if (train.size() < 2 || holdout.size() < 2 || synth.size() < 2)
        throw Error("nnaa: each record set needs at least 2 records");
    return adversarial_accuracy(holdout, synth) - adversarial_accuracy(train, synth);
}

PrivacyReport privacy_report(const std::vector<LeadSet>& train,
                             const std::vector<LeadSet>& holdout,
                             const std::vector<LeadSet>& synth) {
    PrivacyReport r;
    r.mir = mir(train, holdout, synth);
    r.nnaa = nnaa(train, holdout, synth);
    auto d_tr = nn_distances(train, synth);
    auto d_ho = nn_distances(holdout, synth);
    for (double d : d_tr) r.mean_nn_train += d;
    for (double d : d_ho) r.mean_nn_holdout += d;
    r.mean_nn_train /= double(d_tr.size());
    r.mean_nn_holdout /= double(d_ho.size());
    return r;
}

}  // namespace midt
