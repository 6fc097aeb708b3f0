#include "midt/conditioning.hpp"

namespace midt {

const std::array<const char*, GroupSchema::kNumGroups>& GroupSchema::group_names() {
    static const std::array<const char*, kNumGroups> names = {"diagnostic", "form", "rhythm",
                                                              "age", "gender"};
    return names;
}

GroupMask GroupMask::all() { return GroupMask{}; }
GroupMask GroupMask::none() {
    GroupMask m;
    m.enabled.fill(false);
    return m;
}

size_t age_bin(double age_years) {
    if (age_years < 0.0) throw Error("age_bin: negative age");
    size_t bin = 0;
    for (double c : kAgeCutoffs)
        if (age_years > c) ++bin;
    return bin;
}

std::vector<double> encode_age(double age_years) {
    std::vector<double> v(kAgeCutoffs.size() + 1, 0.0);
    v[age_bin(age_years)] = 1.0;
    return v;
}

std::vector<double> encode_gender(Gender g) {
    return g == Gender::male ? std::vector<double>{1.0, 0.0} : std::vector<double>{0.0, 1.0};
}

static std::vector<double> multi_hot(const std::vector<int>& idx, size_t n, const char* group) {
    std::vector<double> v(n, 0.0);
    for (int i : idx) {
        if (i < 0 || size_t(i) >= n)
            throw Error(std::string("encode_label_groups: ") + group + " index " +
                        std::to_string(i) + " out of range [0, " + std::to_string(n) + ")");
        v[size_t(i)] = 1.0;
    }
    return v;
}

LabelGroups encode_label_groups(const RecordMeta& meta) {
    LabelGroups g;
    g.diagnostic = multi_hot(meta.diagnostic_labels, 40, "diagnostic");
    g.form = multi_hot(meta.form_labels, 19, "form");
    g.rhythm = multi_hot(meta.rhythm_labels, 12, "rhythm");
    return g;
}

std::vector<std::vector<double>> encode_groups(const RecordMeta& meta) {
    LabelGroups lg = encode_label_groups(meta);
    return {lg.diagnostic, lg.form, lg.rhythm, encode_age(meta.age_years),
            encode_gender(meta.gender)};
}

void init_embedding_tables(ParameterStore& store, uint64_t seed) {
    Rng rng(seed);
    for (size_t k = 0; k < GroupSchema::kNumGroups; ++k) {
        size_t rows = GroupSchema::group_sizes[k];
        Tensor w = Tensor::zeros({rows, GroupSchema::kEmbeddingDim});
        for (auto& v : w.data) v = 0.02 * rng.normal();
        store.add(std::string("embed.") + GroupSchema::group_names()[k], std::move(w));
    }
}

std::vector<double> build_conditioning_vector(const RecordMeta& meta, const ParameterStore& tables,
                                              const GroupMask& mask) {
    auto groups = encode_groups(meta);
    constexpr size_t D = GroupSchema::kEmbeddingDim;
    std::vector<double> c(GroupSchema::conditioning_dim(), 0.0);
    for (size_t k = 0; k < GroupSchema::kNumGroups; ++k) {
        if (!mask.enabled[k]) continue;
        const Tensor& W = tables.at(std::string("embed.") + GroupSchema::group_names()[k]);
        if (W.shape != std::vector<size_t>{GroupSchema::group_sizes[k], D})
            throw Error("build_conditioning_vector: table shape mismatch for group " +
                        std::string(GroupSchema::group_names()[k]));
        for (size_t i = 0; i < groups[k].size(); ++i) {
            double y = groups[k][i];
            if (y == 0.0) continue;
            for (size_t d = 0; d < D; ++d) c[k * D + d] += y * W.data[i * D + d];
        }
    }
    return c;
}

int conditioning_node(Graph& g, const RecordMeta& meta, ParameterStore& tables,
                      const GroupMask& mask) {
    auto groups = encode_groups(meta);
    constexpr size_t D = GroupSchema::kEmbeddingDim;
    int cat = -1;
    for (size_t k = 0; k < GroupSchema::kNumGroups; ++k) {
        int seg;
        if (mask.enabled[k]) {
            int y = g.constant(Tensor({1, groups[k].size()}, groups[k]));
            int w = g.param(tables, std::string("embed.") + GroupSchema::group_names()[k]);
            seg = g.reshape(g.matmul(y, w), {D});  // y^T W == (W^T y)^T
        } else {
            seg = g.constant(Tensor::zeros({D}));
        }
        cat = cat < 0 ? seg : g.concat(cat, seg);
    }
    return cat;
}

}  // namespace midt
