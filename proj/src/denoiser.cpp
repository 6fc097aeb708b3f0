#include "midt/denoiser.hpp"

#include <cmath>

namespace midt {

void NetConfig::validate() const {
    if (n_blocks < 1) throw Error("NetConfig: n_blocks must be >= 1");
    if (hidden < 1 || kernel < 1 || step_embedding_dim < 2 || dilations.empty())
        throw Error("NetConfig: invalid field");
}

Tensor to_channels_major(const Tensor& lc) {
    size_t L = lc.shape[0], C = lc.shape[1];
    Tensor out = Tensor::zeros({C, L});
    for (size_t t = 0; t < L; ++t)
        for (size_t c = 0; c < C; ++c) out.data[c * L + t] = lc.data[t * C + c];
    return out;
}

Tensor to_time_major(const Tensor& cl) {
    size_t C = cl.shape[0], L = cl.shape[1];
    Tensor out = Tensor::zeros({L, C});
    for (size_t c = 0; c < C; ++c)
        for (size_t t = 0; t < L; ++t) out.data[t * C + c] = cl.data[c * L + t];
    return out;
}

void init_denoiser(ParameterStore& store, const NetConfig& cfg, size_t n_leads,
                   size_t cond_dim, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    auto randn = [&](std::vector<size_t> shape) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = 0.02 * rng.normal();
        return t;
    };
    store.add("net.in_proj", randn({cfg.hidden, n_leads}));
    store.add("net.t_proj", randn({cfg.hidden, cfg.step_embedding_dim}));
    for (size_t k = 0; k < cfg.n_blocks; ++k) {
        std::string p = "net.block" + std::to_string(k) + ".";
        store.add(p + "conv", randn({cfg.hidden, cfg.hidden, cfg.kernel}));
        store.add(p + "gamma", randn({cfg.hidden, cond_dim}));
        store.add(p + "delta", randn({cfg.hidden, cond_dim}));
    }
    store.add("net.out_proj", Tensor::zeros({n_leads, cfg.hidden}));
}

size_t denoiser_param_count(const NetConfig& cfg, size_t n_leads, size_t cond_dim) {
    size_t h = cfg.hidden;
    return h * n_leads + h * cfg.step_embedding_dim +
           cfg.n_blocks * (h * h * cfg.kernel + 2 * h * cond_dim) + n_leads * h;
}

std::vector<double> step_embedding(size_t t, size_t dim) {
    std::vector<double> e(dim, 0.0);
    size_t half = dim / 2;
    for (size_t i = 0; i < half; ++i) {
        double freq = std::pow(10000.0, -double(i) / double(half));
        e[2 * i] = std::sin(double(t) * freq);
        e[2 * i + 1] = std::cos(double(t) * freq);
    }
    return e;
}

int denoise_forward_node(Graph& g, ParameterStore& store, const NetConfig& cfg,
                         int x_t_node, size_t t, int c_node) {
    cfg.validate();
    const auto& xshape = g.value(x_t_node).shape;
    if (xshape.size() != 2) throw Error("denoise_forward: x_t must be rank 2 {C, L}");
    size_t L = xshape[1];
    size_t cond_dim = g.value(c_node).size();

    int h = g.matmul(g.param(store, "net.in_proj"), x_t_node);  // {H, L}

    auto temb = step_embedding(t, cfg.step_embedding_dim);
    int temb_c = g.constant(Tensor({cfg.step_embedding_dim, 1}, temb));
    int tvec = g.reshape(g.matmul(g.param(store, "net.t_proj"), temb_c), {cfg.hidden});
    h = g.add(h, g.broadcast_col(tvec, L));

    int c_col = g.reshape(c_node, {cond_dim, 1});
    int ones = g.constant(Tensor::full({cfg.hidden}, 1.0));
    for (size_t k = 0; k < cfg.n_blocks; ++k) {
        std::string p = "net.block" + std::to_string(k) + ".";
        size_t dil = cfg.dilations[k % cfg.dilations.size()];
        int u = g.conv1d(h, g.param(store, p + "conv"), dil);
        int gamma = g.reshape(g.matmul(g.param(store, p + "gamma"), c_col), {cfg.hidden});
        int delta = g.reshape(g.matmul(g.param(store, p + "delta"), c_col), {cfg.hidden});
        // h <- h * (1 + gamma(c)) + delta(c), per channel across time
        u = g.add(g.mul(u, g.broadcast_col(g.add(ones, gamma), L)),
                  g.broadcast_col(delta, L));
        h = g.add(h, g.tanh_(u));
    }
    return g.matmul(g.param(store, "net.out_proj"), h);  // {C, L}
}

LeadSet denoise_forward(ParameterStore& store, const NetConfig& cfg, const LeadSet& x_t,
                        size_t t, const std::vector<double>& c) {
    Graph g;
    int x = g.constant(to_channels_major(x_t.samples));
    int cn = g.constant(Tensor({c.size()}, c));
    int out = denoise_forward_node(g, store, cfg, x, t, cn);
    LeadSet res;
    res.sample_rate_hz = x_t.sample_rate_hz;
    res.samples = to_time_major(g.value(out));
    return res;
}

}  // namespace midt
