#include "midt/diffusion.hpp"

#include <cmath>

namespace midt {

double NoiseSchedule::abar(size_t t) const {
    if (t < 1 || t > T) throw Error("NoiseSchedule: t out of range [1, " + std::to_string(T) + "]");
    return alpha_bar[t - 1];
}

NoiseSchedule make_schedule(size_t T, double beta_1, double beta_T) {
    if (T < 1) throw Error("make_schedule: T must be >= 1");
    if (!(beta_1 > 0.0 && beta_1 <= beta_T && beta_T < 1.0))
        throw Error("make_schedule: need 0 < beta_1 <= beta_T < 1");
    NoiseSchedule s;
    s.T = T;
    s.beta.resize(T);
    s.alpha.resize(T);
    s.alpha_bar.resize(T);
    double prod = 1.0;
    for (size_t i = 0; i < T; ++i) {
        s.beta[i] = T == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * double(i) / double(T - 1);
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
    }
    return s;
}

LeadSet forward_noise(const LeadSet& x0, size_t t, const LeadSet& eps, const NoiseSchedule& s) {
    if (!x0.samples.same_shape(eps.samples))
        throw Error("forward_noise: eps shape mismatch");
    double ab = s.abar(t);
    double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    LeadSet out = x0;
    for (size_t i = 0; i < out.samples.size(); ++i)
        out.samples.data[i] = sa * x0.samples.data[i] + sn * eps.samples.data[i];
    return out;
}

LeadSet reconstruct_x0(const LeadSet& x_t, const LeadSet& eps_hat, size_t t,
                       const NoiseSchedule& s) {
    if (!x_t.samples.same_shape(eps_hat.samples))
        throw Error("reconstruct_x0: eps_hat shape mismatch");
    double ab = s.abar(t);
    double sa = std::sqrt(ab), sn = std::sqrt(1.0 - ab);
    LeadSet out = x_t;
    for (size_t i = 0; i < out.samples.size(); ++i)
        out.samples.data[i] = (x_t.samples.data[i] - sn * eps_hat.samples.data[i]) / sa;
    return out;
}

LossTerms total_loss(const LeadSet& x0, size_t t, const LeadSet& eps, const LeadSet& eps_hat,
                     const NoiseSchedule& s, const TrainConfig& cfg) {
    if (!x0.samples.same_shape(eps.samples) || !x0.samples.same_shape(eps_hat.samples))
        throw Error("total_loss: shape mismatch");
    LossTerms lt;
    for (size_t i = 0; i < eps.samples.size(); ++i) {
        double d = eps_hat.samples.data[i] - eps.samples.data[i];
        lt.mse += d * d;
    }
    lt.mse /= double(eps.samples.size());
    LeadSet x_t = forward_noise(x0, t, eps, s);
    LeadSet x0_hat = reconstruct_x0(x_t, eps_hat, t, s);
    lt.midt = midt_loss(x0_hat, x0, cfg.midt);
    lt.total = lt.mse + cfg.midt_weight * lt.midt;
    return lt;
}

namespace {

LeadSet normal_leadset(size_t L, size_t C, double fs, Rng& rng) {
    LeadSet e;
    e.sample_rate_hz = fs;
    e.samples = Tensor::zeros({L, C});
    for (auto& v : e.samples.data) v = rng.normal();
    return e;
}

}  // namespace

TrainResult train(const Dataset& train_ds, const NetConfig& net, const NoiseSchedule& sched,
                  const TrainConfig& cfg) {
    if (train_ds.empty()) throw Error("train: empty training split");
    size_t L = train_ds.records[0].leads.length();
    size_t C = train_ds.records[0].leads.n_leads();
    double fs = train_ds.records[0].leads.sample_rate_hz;
    cfg.midt.validate(L);

    TrainResult res;
    init_embedding_tables(res.params, Rng(cfg.seed).fork(0x656D6264).next_u64());
    init_denoiser(res.params, net, C, GroupSchema::conditioning_dim(),
                  Rng(cfg.seed).fork(0x6E6574).next_u64());

    for (size_t step = 0; step < cfg.steps; ++step) {
        Rng step_rng = Rng(cfg.seed).fork(step);
        GradMap acc;
        LossRow row{step, 0.0, 0.0, 0.0};
        for (size_t b = 0; b < cfg.batch_size; ++b) {
            const Record& rec = train_ds.records[step_rng.uniform_int(train_ds.size())];
            size_t t = 1 + step_rng.uniform_int(sched.T);
            LeadSet eps = normal_leadset(L, C, fs, step_rng);
            LeadSet x_t = forward_noise(rec.leads, t, eps, sched);

            Graph g;
            int c_node = conditioning_node(g, rec.meta, res.params, cfg.group_mask);
            int xt_node = g.constant(to_channels_major(x_t.samples));
            int eps_hat = denoise_forward_node(g, res.params, net, xt_node, t, c_node);
            int eps_const = g.constant(to_channels_major(eps.samples));
            int loss_mse = g.mean(g.square(g.sub(eps_hat, eps_const)));

            double ab = sched.abar(t);
            int x0_hat = g.scale(g.sub(xt_node, g.scale(eps_hat, std::sqrt(1.0 - ab))),
                                 1.0 / std::sqrt(ab));
            int loss_midt = midt_loss_node(g, x0_hat, rec.leads, cfg.midt);
            int total = g.add(loss_mse, g.scale(loss_midt, cfg.midt_weight));

            g.backward(total);
            row.mse += g.value(loss_mse).data[0];
            row.midt += g.value(loss_midt).data[0];
            row.total += g.value(total).data[0];
            for (auto& [name, grad] : g.param_grads()) {
                auto it = acc.find(name);
                if (it == acc.end()) {
                    acc.emplace(name, grad);
                } else {
                    for (size_t i = 0; i < grad.size(); ++i) it->second.data[i] += grad.data[i];
                }
            }
        }
        double inv = 1.0 / double(cfg.batch_size);
        row.mse *= inv;
        row.midt *= inv;
        row.total *= inv;
        if (!std::isfinite(row.total))
            throw Error("train: non-finite loss at step " + std::to_string(step));
        for (auto& [name, grad] : acc)
            for (auto& v : grad.data) v *= inv;
        adam_step(res.params, acc, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
        res.trace.push_back(row);
    }
    return res;
}

std::vector<LeadSet> sample(ParameterStore& params, const NetConfig& net,
                            const std::vector<double>& c, const NoiseSchedule& sched,
                            size_t n, size_t length, size_t n_leads, double sample_rate_hz,
                            uint64_t seed) {
    std::vector<LeadSet> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Rng rng = Rng(seed).fork(i);
        LeadSet x = normal_leadset(length, n_leads, sample_rate_hz, rng);
        for (size_t t = sched.T; t >= 1; --t) {
            LeadSet eps_hat = denoise_forward(params, net, x, t, c);
            double a = sched.alpha[t - 1], b = sched.beta[t - 1], ab = sched.abar(t);
            double inv_sa = 1.0 / std::sqrt(a);
            double coef = b / std::sqrt(1.0 - ab);
            double sigma = std::sqrt(b);
            for (size_t j = 0; j < x.samples.size(); ++j) {
                double mu = inv_sa * (x.samples.data[j] - coef * eps_hat.samples.data[j]);
                double z = t > 1 ? rng.normal() : 0.0;
                x.samples.data[j] = mu + sigma * z;
            }
        }
        out.push_back(std::move(x));
    }
    return out;
}

}  // namespace midt
