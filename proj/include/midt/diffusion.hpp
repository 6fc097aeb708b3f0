#pragma once

#include <cstdint>
#include <vector>

#include "midt/conditioning.hpp"
#include "midt/denoiser.hpp"
#include "midt/signal_io.hpp"
#include "midt/spectro.hpp"

namespace midt {

struct NoiseSchedule {
    size_t T = 0;
    std::vector<double> beta;       // index t-1 holds beta_t
    std::vector<double> alpha;      // 1 - beta_t
    std::vector<double> alpha_bar;  // cumulative product

    double abar(size_t t) const;  // 1-based
};

// Linear beta schedule from beta_1 to beta_T.
NoiseSchedule make_schedule(size_t T, double beta_1, double beta_T);

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps
LeadSet forward_noise(const LeadSet& x0, size_t t, const LeadSet& eps, const NoiseSchedule& s);

// x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
LeadSet reconstruct_x0(const LeadSet& x_t, const LeadSet& eps_hat, size_t t,
                       const NoiseSchedule& s);

struct TrainConfig {
    double midt_weight = 0.1;  // weight of the spectral term in the total loss
    size_t batch_size = 8;
    size_t steps = 300;
    double lr = 1e-3;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    uint64_t seed = 0;
    MidtConfig midt = MidtConfig::defaults();
    GroupMask group_mask = GroupMask::all();
};

struct LossTerms {
    double mse = 0.0, midt = 0.0, total = 0.0;
};

// L_Total = L_MSE(eps_hat, eps) + midt_weight * L_MIDT(x0_hat, x0),
// with x0_hat reconstructed from forward_noise(x0, t, eps) and eps_hat.
LossTerms total_loss(const LeadSet& x0, size_t t, const LeadSet& eps, const LeadSet& eps_hat,
                     const NoiseSchedule& s, const TrainConfig& cfg);

struct LossRow {
    size_t step;
    double mse, midt, total;
};

struct TrainResult {
    ParameterStore params;
    std::vector<LossRow> trace;
};

// Denoiser + embedding-table training; fully deterministic given
// (dataset, configs, seed). Throws on a non-finite loss, naming the step.
TrainResult train(const Dataset& train_ds, const NetConfig& net, const NoiseSchedule& sched,
                  const TrainConfig& cfg);

// Ancestral sampling, n records conditioned on the same vector c.
std::vector<LeadSet> sample(ParameterStore& params, const NetConfig& net,
                            const std::vector<double>& c, const NoiseSchedule& sched,
                            size_t n, size_t length, size_t n_leads, double sample_rate_hz,
                            uint64_t seed);

}  // namespace midt
