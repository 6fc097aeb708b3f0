#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "midt/conditioning.hpp"
#include "midt/rng.hpp"

using namespace midt;

namespace {

RecordMeta basic_meta() {
    RecordMeta m;
    m.age_years = 30.0;
    m.gender = Gender::female;
    m.diagnostic_labels = {3};
    m.form_labels = {};
    m.rhythm_labels = {5};
    return m;
}

}  // namespace

TEST_CASE("age binning against the cutoff table") {
    // cutoffs [12, 17, 34, 54, 74]; bin = number of cutoffs strictly below age
    CHECK(age_bin(0.0) == 0);
    CHECK(age_bin(12.0) == 0);
    CHECK(age_bin(13.0) == 1);
    CHECK(age_bin(17.0) == 1);
    CHECK(age_bin(18.0) == 2);
    CHECK(age_bin(30.0) == 2);
    CHECK(age_bin(34.0) == 2);
    CHECK(age_bin(35.0) == 3);
    CHECK(age_bin(54.0) == 3);
    CHECK(age_bin(74.0) == 4);
    CHECK(age_bin(75.0) == 5);
    CHECK(age_bin(90.0) == 5);
    CHECK_THROWS_AS(age_bin(-1.0), Error);
}

TEST_CASE("group indicator encodings") {
    SUBCASE("age one-hot") {
        auto v = encode_age(30.0);
        REQUIRE(v.size() == 6);
        CHECK(v[2] == 1.0);
        double sum = 0.0;
        for (double x : v) sum += x;
        CHECK(sum == 1.0);
    }
    SUBCASE("gender one-hot") {
        CHECK(encode_gender(Gender::male) == std::vector<double>{1.0, 0.0});
        CHECK(encode_gender(Gender::female) == std::vector<double>{0.0, 1.0});
    }
    SUBCASE("diagnostic single label") {
        RecordMeta m = basic_meta();
        auto g = encode_label_groups(m);
        REQUIRE(g.diagnostic.size() == 40);
        CHECK(g.diagnostic[3] == 1.0);
        double sum = 0.0;
        for (double x : g.diagnostic) sum += x;
        CHECK(sum == 1.0);
    }
    SUBCASE("absent rhythm group encodes to zeros") {
        RecordMeta m = basic_meta();
        m.rhythm_labels = {};
        auto g = encode_label_groups(m);
        REQUIRE(g.rhythm.size() == 12);
        for (double x : g.rhythm) CHECK(x == 0.0);
    }
    SUBCASE("multi-hot form labels") {
        RecordMeta m = basic_meta();
        m.form_labels = {0, 18};
        auto g = encode_label_groups(m);
        CHECK(g.form[0] == 1.0);
        CHECK(g.form[18] == 1.0);
        double sum = 0.0;
        for (double x : g.form) sum += x;
        CHECK(sum == 2.0);
    }
    SUBCASE("out-of-range labels are rejected") {
        RecordMeta m = basic_meta();
        m.diagnostic_labels = {40};
        CHECK_THROWS_AS(encode_label_groups(m), Error);
        m = basic_meta();
        m.rhythm_labels = {-1};
        CHECK_THROWS_AS(encode_label_groups(m), Error);
    }
}

TEST_CASE("conditioning vector structure") {
    ParameterStore tables;
    init_embedding_tables(tables, 77);

    SUBCASE("length is 160 = 5 groups x 32") {
        auto c = build_conditioning_vector(basic_meta(), tables);
        CHECK(c.size() == GroupSchema::conditioning_dim());
        CHECK(c.size() == 160);
    }
    SUBCASE("all-zero indicators give the zero vector") {
        RecordMeta m = basic_meta();
        m.diagnostic_labels = {};
        m.rhythm_labels = {};
        GroupMask mask = GroupMask::all();
        mask.enabled[3] = false;  // suppress age
        mask.enabled[4] = false;  // suppress gender
        auto c = build_conditioning_vector(m, tables, mask);
        for (double v : c) CHECK(v == 0.0);
    }
    SUBCASE("identity-like table reproduces the selected row") {
        ParameterStore ident;
        init_embedding_tables(ident, 1);
        Tensor& diag = ident.at("embed.diagnostic");
        for (auto& v : diag.data) v = 0.0;
        for (size_t r = 0; r < 40; ++r) diag.at(r, r % 32) = double(r + 1);
        RecordMeta m = basic_meta();
        m.diagnostic_labels = {7};
        auto c = build_conditioning_vector(m, ident);
        for (size_t d = 0; d < 32; ++d)
            CHECK(c[d] == (d == 7 ? 8.0 : 0.0));
    }
    SUBCASE("gender change only touches the final 32 entries") {
        RecordMeta a = basic_meta(), b = basic_meta();
        b.gender = Gender::male;
        auto ca = build_conditioning_vector(a, tables);
        auto cb = build_conditioning_vector(b, tables);
        for (size_t i = 0; i < 128; ++i) CHECK(ca[i] == cb[i]);
        double diff = 0.0;
        for (size_t i = 128; i < 160; ++i) diff += std::fabs(ca[i] - cb[i]);
        CHECK(diff > 0.0);
    }
    SUBCASE("linearity: two labels sum their embeddings") {
        RecordMeta one = basic_meta(), two = basic_meta(), both = basic_meta();
        one.form_labels = {2};
        two.form_labels = {9};
        both.form_labels = {2, 9};
        auto c1 = build_conditioning_vector(one, tables);
        auto c2 = build_conditioning_vector(two, tables);
        auto cb = build_conditioning_vector(both, tables);
        for (size_t d = 32; d < 64; ++d)  // form segment
            CHECK(cb[d] == doctest::Approx(c1[d] + c2[d] - build_conditioning_vector(basic_meta(), tables)[d]).epsilon(1e-12));
    }
    SUBCASE("masked groups zero their segment") {
        GroupMask mask = GroupMask::all();
        mask.enabled[0] = false;
        auto c = build_conditioning_vector(basic_meta(), tables, mask);
        for (size_t d = 0; d < 32; ++d) CHECK(c[d] == 0.0);
        double rest = 0.0;
        for (size_t d = 32; d < 160; ++d) rest += std::fabs(c[d]);
        CHECK(rest > 0.0);
    }
}

TEST_CASE("embedding table registration and initialization") {
    ParameterStore a, b;
    init_embedding_tables(a, 5);
    init_embedding_tables(b, 5);
    for (size_t k = 0; k < GroupSchema::kNumGroups; ++k) {
        std::string name = std::string("embed.") + GroupSchema::group_names()[k];
        REQUIRE(a.has(name));
        CHECK(a.at(name).shape ==
              std::vector<size_t>{GroupSchema::group_sizes[k], GroupSchema::kEmbeddingDim});
        CHECK(a.at(name).data == b.at(name).data);  // seeded determinism
    }
    // init scale is small: sample std should be near 0.02
    double ss = 0.0;
    size_t n = 0;
    for (size_t k = 0; k < GroupSchema::kNumGroups; ++k) {
        const Tensor& t = a.at(std::string("embed.") + GroupSchema::group_names()[k]);
        for (double v : t.data) {
            ss += v * v;
            ++n;
        }
    }
    CHECK(std::sqrt(ss / double(n)) == doctest::Approx(0.02).epsilon(0.2));
}

TEST_CASE("graph conditioning node matches the plain vector and trains") {
    ParameterStore tables;
    init_embedding_tables(tables, 13);
    RecordMeta m = basic_meta();

    SUBCASE("value agreement, including masks") {
        for (GroupMask mask : {GroupMask::all(), GroupMask::none()}) {
            Graph g;
            int c = conditioning_node(g, m, tables, mask);
            auto plain = build_conditioning_vector(m, tables, mask);
            REQUIRE(g.value(c).size() == plain.size());
            for (size_t i = 0; i < plain.size(); ++i)
                CHECK(g.value(c).data[i] == doctest::Approx(plain[i]).epsilon(1e-12));
        }
    }
    SUBCASE("gradients flow into the embedding tables") {
        Graph g;
        int c = conditioning_node(g, m, tables);
        int loss = g.sum(g.square(c));
        g.backward(loss);
        auto grads = g.param_grads();
        REQUIRE(grads.count("embed.diagnostic") == 1);
        double nz = 0.0;
        for (double v : grads.at("embed.diagnostic").data) nz += std::fabs(v);
        CHECK(nz > 0.0);  // the active label row receives gradient
    }
    SUBCASE("finite differences on an embedding table") {
        auto build = [&](Graph& g, ParameterStore& s) {
            return g.sum(g.square(conditioning_node(g, m, s)));
        };
        CHECK(finite_difference_check(build, tables, "embed.age", 1e-5) < 1e-4);
    }
}
