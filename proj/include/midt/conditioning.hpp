#pragma once

#include <array>
#include <string>
#include <vector>

#include "midt/graph.hpp"
#include "midt/signal_io.hpp"

namespace midt {

// Fixed group layout of the patient representation: five attribute groups,
// each projected into its own 32-dim embedding and concatenated (length 160).
struct GroupSchema {
    static constexpr size_t kEmbeddingDim = 32;
    static constexpr size_t kNumGroups = 5;
    static constexpr std::array<size_t, kNumGroups> group_sizes = {40, 19, 12, 6, 2};
    static const std::array<const char*, kNumGroups>& group_names();
    static constexpr size_t conditioning_dim() { return kNumGroups * kEmbeddingDim; }  // 160
};

// Which groups contribute; masked groups yield a zero 32-entry segment
// (supports the +A / +G ablation variants).
struct GroupMask {
    std::array<bool, GroupSchema::kNumGroups> enabled = {true, true, true, true, true};
    static GroupMask all();
    static GroupMask none();
    bool operator==(const GroupMask&) const = default;
};

inline constexpr std::array<double, 5> kAgeCutoffs = {12, 17, 34, 54, 74};

// Bin index = number of cutoffs strictly below the age.
size_t age_bin(double age_years);
std::vector<double> encode_age(double age_years);          // one-hot, length 6
std::vector<double> encode_gender(Gender g);               // one-hot, length 2

struct LabelGroups {
    std::vector<double> diagnostic;  // multi-hot, length 40
    std::vector<double> form;        // length 19
    std::vector<double> rhythm;      // length 12
};
LabelGroups encode_label_groups(const RecordMeta& meta);

// All five group indicators in schema order.
std::vector<std::vector<double>> encode_groups(const RecordMeta& meta);

// Per-group embedding tables W_k (group_size x 32), registered in the store
// as "embed.<group>"; seeded normal init, std 0.02.
void init_embedding_tables(ParameterStore& store, uint64_t seed);

// c = concat_k(W_k^T y_k), length 160; masked groups contribute zeros.
std::vector<double> build_conditioning_vector(const RecordMeta& meta, const ParameterStore& tables,
                                              const GroupMask& mask = GroupMask::all());

// Differentiable version: gradients flow into the embedding tables.
// Returns a rank-1 node of length 160.
int conditioning_node(Graph& g, const RecordMeta& meta, ParameterStore& tables,
                      const GroupMask& mask = GroupMask::all());

}  // namespace midt
