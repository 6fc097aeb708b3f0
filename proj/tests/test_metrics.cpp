#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "midt/metrics.hpp"
#include "midt/rng.hpp"

using namespace midt;

namespace {

LeadSet from_rows(const std::vector<std::vector<double>>& per_lead) {
    size_t C = per_lead.size(), L = per_lead[0].size();
    LeadSet s;
    s.samples = Tensor::zeros({L, C});
    for (size_t t = 0; t < L; ++t)
        for (size_t c = 0; c < C; ++c) s.samples.data[t * C + c] = per_lead[c][t];
    return s;
}

LeadSet randn_leads(size_t L, size_t C, Rng& rng, double scale = 1.0) {
    LeadSet s;
    s.samples = Tensor::zeros({L, C});
    for (auto& v : s.samples.data) v = scale * rng.normal();
    return s;
}

// O(L^2) brute-force symmetric Hausdorff over {(i/(L-1), v_i)} point sets.
double hausdorff_oracle(const LeadSet& x, const LeadSet& y) {
    size_t L = x.length();
    double dx = L > 1 ? 1.0 / double(L - 1) : 0.0;
    double acc = 0.0;
    for (size_t c = 0; c < x.n_leads(); ++c) {
        auto a = x.lead(c), b = y.lead(c);
        double worst = 0.0;
        auto directed = [&](const std::vector<double>& p, const std::vector<double>& q) {
            double w = 0.0;
            for (size_t i = 0; i < L; ++i) {
                double best = 1e300;
                for (size_t j = 0; j < L; ++j) {
                    double tx = dx * (double(i) - double(j));
                    double dy = p[i] - q[j];
                    best = std::min(best, tx * tx + dy * dy);
                }
                w = std::max(w, best);
            }
            return w;
        };
        worst = std::max(directed(a, b), directed(b, a));
        acc += std::sqrt(worst);
    }
    return acc / double(x.n_leads());
}

double corr_oracle_entry(const std::vector<LeadSet>& recs, size_t i, size_t j) {
    std::vector<double> xi, xj;
    for (const auto& r : recs) {
        auto a = r.lead(i), b = r.lead(j);
        xi.insert(xi.end(), a.begin(), a.end());
        xj.insert(xj.end(), b.begin(), b.end());
    }
    double mi = 0.0, mj = 0.0;
    for (size_t k = 0; k < xi.size(); ++k) {
        mi += xi[k];
        mj += xj[k];
    }
    mi /= double(xi.size());
    mj /= double(xj.size());
    double num = 0.0, di = 0.0, dj = 0.0;
    for (size_t k = 0; k < xi.size(); ++k) {
        num += (xi[k] - mi) * (xj[k] - mj);
        di += (xi[k] - mi) * (xi[k] - mi);
        dj += (xj[k] - mj) * (xj[k] - mj);
    }
    return num / std::sqrt(di * dj);
}

}  // namespace

TEST_CASE("pointwise fidelity hand cases") {
    SUBCASE("x=[0,1], y=[1,1]: mse 0.5, rmse 0.70710678") {
        Fidelity f = pointwise_fidelity(from_rows({{0.0, 1.0}}), from_rows({{1.0, 1.0}}));
        CHECK(f.mse == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(f.rmse == doctest::Approx(0.70710678).epsilon(1e-7));
    }
    SUBCASE("identical inputs: zero errors, snr absent") {
        LeadSet x = from_rows({{1.0, -2.0, 3.0}});
        Fidelity f = pointwise_fidelity(x, x);
        CHECK(f.rmse == 0.0);
        CHECK(f.mse == 0.0);
        CHECK_FALSE(f.snr_db.has_value());
    }
    SUBCASE("uniform 0.1 offset: snr = 10 log10(2/0.04) ~ 16.9897 dB") {
        LeadSet x = from_rows({{1.0, 0.0, -1.0, 0.0}});
        LeadSet y = from_rows({{1.1, 0.1, -0.9, 0.1}});
        Fidelity f = pointwise_fidelity(x, y);
        REQUIRE(f.snr_db.has_value());
        CHECK(*f.snr_db == doctest::Approx(16.9897).epsilon(1e-4));
    }
}

TEST_CASE("fourier distance") {
    SUBCASE("identity gives 0") {
        Rng rng(1);
        LeadSet x = randn_leads(16, 2, rng);
        CHECK(fourier_distance(x, x) == 0.0);
    }
    SUBCASE("shifted impulses have equal magnitude spectra") {
        LeadSet x = from_rows({{1.0, 0.0, 0.0, 0.0}});
        LeadSet y = from_rows({{0.0, 1.0, 0.0, 0.0}});
        CHECK(fourier_distance(x, y) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(pointwise_fidelity(x, y).rmse == doctest::Approx(0.70710678).epsilon(1e-7));
    }
    SUBCASE("never exceeds rmse (Parseval + reverse triangle inequality)") {
        Rng rng(2);
        for (int rep = 0; rep < 100; ++rep) {
            LeadSet x = randn_leads(24, 2, rng);
            LeadSet y = randn_leads(24, 2, rng);
            CHECK(fourier_distance(x, y) <= pointwise_fidelity(x, y).rmse + 1e-9);
        }
    }
}

TEST_CASE("hausdorff distance") {
    SUBCASE("identity gives 0") {
        Rng rng(3);
        LeadSet x = randn_leads(16, 1, rng);
        CHECK(hausdorff_distance(x, x) == 0.0);
    }
    SUBCASE("two-point hand case: A={(0,0),(1,0)}, B={(0,1),(1,0)} gives 1.0") {
        LeadSet a = from_rows({{0.0, 0.0}});
        LeadSet b = from_rows({{1.0, 0.0}});
        CHECK(hausdorff_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("matches the brute-force double loop to 1e-12") {
        Rng rng(4);
        for (int rep = 0; rep < 100; ++rep) {
            LeadSet x = randn_leads(32, 2, rng);
            LeadSet y = randn_leads(32, 2, rng, rep % 3 == 0 ? 0.05 : 1.0);
            CHECK(hausdorff_distance(x, y) == doctest::Approx(hausdorff_oracle(x, y)).epsilon(1e-12));
        }
    }
}

TEST_CASE("1-D ssim") {
    SUBCASE("identity gives 1") {
        Rng rng(5);
        LeadSet x = randn_leads(64, 2, rng);
        CHECK(ssim_1d(x, x, 16, 8, 4.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant 1 vs constant 0, range 1: (2*0+C1)/(1+C1)") {
        LeadSet a = from_rows({std::vector<double>(32, 1.0)});
        LeadSet b = from_rows({std::vector<double>(32, 0.0)});
        double c1 = 0.01 * 0.01;
        CHECK(ssim_1d(a, b, 16, 8, 1.0) == doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-9));
        CHECK(ssim_1d(a, b, 16, 8, 1.0) == doctest::Approx(9.999e-5).epsilon(1e-3));
    }
    SUBCASE("symmetric in its arguments") {
        Rng rng(6);
        for (int rep = 0; rep < 10; ++rep) {
            LeadSet x = randn_leads(48, 2, rng);
            LeadSet y = randn_leads(48, 2, rng);
            CHECK(ssim_1d(x, y, 16, 8, 4.0) == ssim_1d(y, x, 16, 8, 4.0));
        }
    }
    SUBCASE("window longer than the signal is rejected") {
        Rng rng(7);
        LeadSet x = randn_leads(8, 1, rng);
        CHECK_THROWS_AS(ssim_1d(x, x, 16, 8, 1.0), Error);
    }
}

TEST_CASE("correlation matrix") {
    SUBCASE("scaled and negated leads") {
        std::vector<double> base = {1.0, -0.5, 2.0, 0.25, -1.5, 0.75};
        std::vector<double> twice = base, neg = base;
        for (auto& v : twice) v *= 2.0;
        for (auto& v : neg) v = -v;
        std::vector<LeadSet> recs = {from_rows({base, twice, neg})};
        Tensor m = corr_matrix(recs);
        CHECK(m.at(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.at(0, 2) == doctest::Approx(-1.0).epsilon(1e-12));
        for (size_t i = 0; i < 3; ++i) CHECK(m.at(i, i) == 1.0);
    }
    SUBCASE("matches the brute-force oracle to 1e-12") {
        Rng rng(8);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<LeadSet> recs;
            for (int r = 0; r < 4; ++r) recs.push_back(randn_leads(16, 3, rng));
            Tensor m = corr_matrix(recs);
            for (size_t i = 0; i < 3; ++i)
                for (size_t j = i + 1; j < 3; ++j)
                    CHECK(m.at(i, j) ==
                          doctest::Approx(corr_oracle_entry(recs, i, j)).epsilon(1e-12));
        }
    }
    SUBCASE("constant lead is rejected with its index") {
        std::vector<LeadSet> recs = {from_rows({{1.0, 2.0, 3.0}, {5.0, 5.0, 5.0}})};
        CHECK_THROWS_WITH_AS(corr_matrix(recs), doctest::Contains("lead 1"), Error);
    }
}

TEST_CASE("correlation error summary") {
    SUBCASE("identical matrices give (0, 0)") {
        Tensor m({2, 2}, {1.0, 0.3, 0.3, 1.0});
        auto [avg, mx] = corr_error(m, m);
        CHECK(avg == 0.0);
        CHECK(mx == 0.0);
    }
    SUBCASE("3x3 with off-diagonal diffs {0.1, 0.2, 0.3} gives (0.2, 0.3)") {
        Tensor a({3, 3}, {1.0, 0.5, 0.4, 0.5, 1.0, 0.1, 0.4, 0.1, 1.0});
        Tensor b({3, 3}, {1.0, 0.6, 0.6, 0.6, 1.0, 0.4, 0.6, 0.4, 1.0});
        auto [avg, mx] = corr_error(a, b);
        CHECK(avg == doctest::Approx(0.2).epsilon(1e-12));
        CHECK(mx == doctest::Approx(0.3).epsilon(1e-12));
    }
    SUBCASE("asymmetric inputs are rejected") {
        Tensor a({2, 2}, {1.0, 0.5, 0.2, 1.0});
        Tensor b({2, 2}, {1.0, 0.1, 0.1, 1.0});
        CHECK_THROWS_AS(corr_error(a, b), Error);
    }
}

TEST_CASE("outlier flags") {
    SUBCASE("[1,2,3,4,100]: threshold 10, only 100 flagged") {
        auto flags = outlier_flags({1, 2, 3, 4, 100});
        CHECK(flags == std::vector<bool>{false, false, false, false, true});
    }
    SUBCASE("all equal values: zero IQR, no flags") {
        auto flags = outlier_flags({5, 5, 5, 5, 5});
        for (bool f : flags) CHECK_FALSE(f);
    }
    SUBCASE("monotone 1..100: no flags") {
        std::vector<double> v(100);
        for (size_t i = 0; i < 100; ++i) v[i] = double(i + 1);
        for (bool f : outlier_flags(v)) CHECK_FALSE(f);
    }
    SUBCASE("fewer than 4 values rejected") {
        CHECK_THROWS_AS(outlier_flags({1, 2, 3}), Error);
    }
}

TEST_CASE("membership inference risk") {
    Rng rng(9);
    SUBCASE("synthetic copies of train separate perfectly: mir = 1") {
        std::vector<LeadSet> train, holdout, synth;
        for (int i = 0; i < 10; ++i) {
            train.push_back(randn_leads(16, 1, rng));
            holdout.push_back(randn_leads(16, 1, rng));
        }
        synth = train;
        CHECK(mir(train, holdout, synth) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("independent synth on iid train/holdout: mir < 0.15 at n=200") {
        for (uint64_t seed : {11, 12, 13}) {
            Rng r(seed);
            std::vector<LeadSet> train, holdout, synth;
            for (int i = 0; i < 200; ++i) {
                train.push_back(randn_leads(8, 1, r));
                holdout.push_back(randn_leads(8, 1, r));
            }
            for (int i = 0; i < 100; ++i) synth.push_back(randn_leads(8, 1, r));
            CHECK(mir(train, holdout, synth) < 0.15);
        }
    }
}

TEST_CASE("nearest-neighbor adversarial accuracy gap") {
    SUBCASE("synth copies train: nnaa ~ 0.5") {
        Rng rng(14);
        std::vector<LeadSet> train, holdout;
        for (int i = 0; i < 50; ++i) {
            train.push_back(randn_leads(8, 1, rng));
            holdout.push_back(randn_leads(8, 1, rng));
        }
        double v = nnaa(train, holdout, train);
        CHECK(v >= 0.4);
        CHECK(v <= 0.65);
    }
    SUBCASE("independent synth: |nnaa| < 0.1 at n=200") {
        for (uint64_t seed : {21, 22, 23}) {
            Rng r(seed);
            std::vector<LeadSet> train, holdout, synth;
            for (int i = 0; i < 200; ++i) {
                train.push_back(randn_leads(8, 1, r));
                holdout.push_back(randn_leads(8, 1, r));
                synth.push_back(randn_leads(8, 1, r));
            }
            CHECK(std::fabs(nnaa(train, holdout, synth)) < 0.1);
        }
    }
    SUBCASE("degenerate sets are rejected") {
        Rng rng(30);
        std::vector<LeadSet> one = {randn_leads(8, 1, rng)};
        std::vector<LeadSet> two = {randn_leads(8, 1, rng), randn_leads(8, 1, rng)};
        CHECK_THROWS_AS(nnaa(one, two, two), Error);
    }
}

TEST_CASE("privacy metrics are independent of the thread cap") {
    Rng rng(40);
    std::vector<LeadSet> train, holdout, synth;
    for (int i = 0; i < 30; ++i) {
        train.push_back(randn_leads(8, 1, rng));
        holdout.push_back(randn_leads(8, 1, rng));
        synth.push_back(randn_leads(8, 1, rng));
    }
    setenv("MIDT_THREADS", "1", 1);
    PrivacyReport serial = privacy_report(train, holdout, synth);
    setenv("MIDT_THREADS", "4", 1);
    PrivacyReport parallel = privacy_report(train, holdout, synth);
    unsetenv("MIDT_THREADS");
    CHECK(serial.mir == parallel.mir);
    CHECK(serial.nnaa == parallel.nnaa);
    CHECK(serial.mean_nn_train == parallel.mean_nn_train);
    CHECK(serial.mean_nn_holdout == parallel.mean_nn_holdout);
}
