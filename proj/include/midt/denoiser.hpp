#pragma once

#include <cstdint>
#include <vector>

#include "midt/graph.hpp"
#include "midt/signal_io.hpp"

namespace midt {

// Layer-conditioned residual backbone for the noise predictor: dilated 1-D
// convolutions with per-block affine modulation from the conditioning vector.
// Any layer type with the same (hidden x L in, hidden x L out, c-modulated)
// interface can replace the conv blocks.
struct NetConfig {
    size_t hidden = 32;
    size_t n_blocks = 4;
    size_t kernel = 3;
    size_t step_embedding_dim = 32;
    std::vector<size_t> dilations = {1, 2, 4, 8};  // block k uses dilations[k % size]

    void validate() const;
};

// Parameters registered as "net.in_proj", "net.t_proj", "net.block<k>.conv",
// "net.block<k>.gamma", "net.block<k>.delta", "net.out_proj".
// Seeded normal init std 0.02; the output projection starts at zero.
void init_denoiser(ParameterStore& store, const NetConfig& cfg, size_t n_leads,
                   size_t cond_dim, uint64_t seed);

size_t denoiser_param_count(const NetConfig& cfg, size_t n_leads, size_t cond_dim);

std::vector<double> step_embedding(size_t t, size_t dim);  // sinusoidal

// x_t_node: {C, L} (channels-major); c_node: rank-1 conditioning vector.
// Returns eps_hat node of shape {C, L}.
int denoise_forward_node(Graph& g, ParameterStore& store, const NetConfig& cfg,
                         int x_t_node, size_t t, int c_node);

// Plain forward pass (no gradients). x_t is time-major {L, C} like every
// LeadSet; the result has the same shape.
LeadSet denoise_forward(ParameterStore& store, const NetConfig& cfg, const LeadSet& x_t,
                        size_t t, const std::vector<double>& c);

// {L, C} time-major <-> {C, L} channels-major
Tensor to_channels_major(const Tensor& lc);
Tensor to_time_major(const Tensor& cl);

}  // namespace midt
