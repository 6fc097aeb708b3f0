#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "midt/downstream.hpp"
#include "midt/signal_io.hpp"

using namespace midt;

namespace {

// pairwise Mann-Whitney oracle: P(pos > neg) + 0.5 P(tie)
double auroc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double num = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) num += 1.0;
            else if (scores[i] == scores[j]) num += 0.5;
        }
    }
    return num / double(pairs);
}

OracleConfig clf_oracle(size_t n_records = 120) {
    OracleConfig cfg;
    cfg.n_records = n_records;
    cfg.n_leads = 2;
    cfg.length = 64;
    cfg.latent_sources = 1;
    return cfg;
}

ClassifierConfig fast_clf(size_t steps = 120) {
    ClassifierConfig cfg;
    cfg.hidden = 8;
    cfg.kernel = 5;
    cfg.steps = steps;
    cfg.batch_size = 12;
    cfg.lr = 0.01;
    cfg.seed = 3;
    return cfg;
}

}  // namespace

TEST_CASE("auroc hand cases") {
    SUBCASE("perfect separation gives 1.0") {
        CHECK(auroc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
    }
    SUBCASE("3 of 4 pairs ordered gives 0.75") {
        CHECK(auroc({0.9, 0.2, 0.1, 0.8}, {1, 1, 0, 0}) == doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("all scores tied gives 0.5") {
        CHECK(auroc({0.3, 0.3, 0.3, 0.3}, {1, 0, 1, 0}) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("single-class input is rejected") {
        CHECK_THROWS_AS(auroc({0.1, 0.2}, {1, 1}), Error);
    }
}

TEST_CASE("auroc properties and oracle equivalence") {
    Rng rng(17);
    SUBCASE("matches the pairwise oracle on random instances with ties") {
        for (int rep = 0; rep < 100; ++rep) {
            size_t n = 5 + rng.uniform_int(20);
            std::vector<double> scores(n);
            std::vector<int> labels(n);
            bool pos = false, neg = false;
            for (size_t i = 0; i < n; ++i) {
                // quantized scores to force ties
                scores[i] = double(rng.uniform_int(6)) / 5.0;
                labels[i] = int(rng.uniform_int(2));
                (labels[i] ? pos : neg) = true;
            }
            if (!pos || !neg) {
                labels[0] = 1;
                labels[1] = 0;
            }
            CHECK(auroc(scores, labels) ==
                  doctest::Approx(auroc_oracle(scores, labels)).epsilon(1e-9));
        }
    }
    SUBCASE("invariant under strictly monotone score transforms") {
        std::vector<double> scores = {0.1, 0.5, 0.3, 0.9, 0.2};
        std::vector<int> labels = {0, 1, 0, 1, 1};
        double base = auroc(scores, labels);
        std::vector<double> warped = scores;
        for (auto& s : warped) s = std::exp(3.0 * s);
        CHECK(auroc(warped, labels) == doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("label flip mirrors around 0.5") {
        std::vector<double> scores = {0.1, 0.5, 0.3, 0.9, 0.2};
        std::vector<int> labels = {0, 1, 0, 1, 1}, flipped = labels;
        for (auto& l : flipped) l = 1 - l;
        CHECK(auroc(scores, labels) + auroc(scores, flipped) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("classifier training") {
    Dataset ds = make_oracle_dataset(clf_oracle(), 2);
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);

    SUBCASE("separable oracle classes reach low loss") {
        ClassifierConfig cfg = fast_clf(1000);
        cfg.lr = 0.02;
        Classifier clf = train_classifier(split.train, cfg);
        CHECK(clf.trained);
        CHECK(clf.final_loss < 0.1);
    }
    SUBCASE("same seed gives identical parameters") {
        Classifier a = train_classifier(split.train, fast_clf());
        Classifier b = train_classifier(split.train, fast_clf());
        for (const auto& [name, e] : a.params.entries) CHECK(e.value.data == b.params.at(name).data);
    }
    SUBCASE("trained classifier beats chance on the held-out fold") {
        Classifier clf = train_classifier(split.train, fast_clf(400));
        CHECK(macro_auroc(clf, split.test) > 0.8);
    }
    SUBCASE("label-shuffled training stays near chance") {
        Dataset shuffled = split.train;
        Rng rng(99);
        for (auto& r : shuffled.records)
            r.meta.diagnostic_labels = {int(rng.uniform_int(3))};
        Classifier clf = train_classifier(shuffled, fast_clf(200));
        double a = macro_auroc(clf, split.test);
        CHECK(a >= 0.35);
        CHECK(a <= 0.65);
    }
    SUBCASE("degenerate datasets are rejected") {
        CHECK_THROWS_AS(train_classifier(Dataset{}, fast_clf()), Error);
        Dataset mono = split.train;
        for (auto& r : mono.records) r.meta.diagnostic_labels = {0};
        CHECK_THROWS_AS(train_classifier(mono, fast_clf()), Error);
        Dataset unlabeled = split.train;
        unlabeled.records[0].meta.diagnostic_labels = {};
        CHECK_THROWS_AS(train_classifier(unlabeled, fast_clf()), Error);
    }
}

TEST_CASE("faithfulness") {
    Dataset ds = make_oracle_dataset(clf_oracle(), 2);
    auto split = patient_split(ds, {1, 2, 3, 4, 5, 6, 7, 8}, 9, 10);
    Classifier clf = train_classifier(split.train, fast_clf(400));

    SUBCASE("real records relabeled by the classifier itself are fully faithful") {
        Dataset relabeled = split.test;
        for (auto& r : relabeled.records) {
            auto p = classifier_probs(clf, r.leads);
            size_t arg = size_t(std::max_element(p.begin(), p.end()) - p.begin());
            r.meta.diagnostic_labels = {int(arg)};
        }
        // threshold below the top-1 probability guarantee is not possible in
        // general, so use a threshold the arg-max always clears for 3 classes
        CHECK(faithfulness(relabeled, clf, 1.0 / 3.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("labels scrambled against a near-uniform scorer sit near 1/n_classes") {
        ClassifierConfig cfg = fast_clf(0);  // untrained weights, random scores
        cfg.steps = 1;
        cfg.lr = 0.0;
        Classifier weak = train_classifier(split.train, cfg);
        double f = faithfulness(split.test, weak, 0.5);
        CHECK(f >= 0.0);
        CHECK(f <= 0.7);
    }
}

TEST_CASE("fold-mix experiment") {
    Dataset ds = make_oracle_dataset(clf_oracle(200), 6);
    ClassifierConfig cfg = fast_clf(80);
    FoldMixPlan plan;
    plan.repetitions = 2;
    plan.seed = 41;

    // synthetic folds stand in for a generator: real fold-1..n records with a
    // deterministic per-seed perturbation
    auto gen = [&](size_t n_folds, uint64_t seed) {
        std::vector<int> folds;
        for (size_t f = 1; f <= n_folds; ++f) folds.push_back(int(f));
        Dataset synth = subset_by_folds(ds, folds);
        Rng rng(seed);
        for (auto& r : synth.records)
            for (auto& v : r.leads.samples.data) v += 0.01 * rng.normal();
        return synth;
    };

    SUBCASE("substitute mode: 9 cells, j=8 equals the augment j=0 real-only baseline bit-exactly") {
        plan.mode = FoldMixPlan::Mode::substitute;
        auto cells = fold_mix_experiment(ds, gen, plan, cfg);
        REQUIRE(cells.size() == 9);
        for (size_t j = 0; j < 9; ++j) CHECK(cells[j].folds_added == j);

        FoldMixPlan aug = plan;
        aug.mode = FoldMixPlan::Mode::augment;
        auto aug_cells = fold_mix_experiment(ds, gen, aug, cfg);
        // substitute j=8 and augment j=0 train on the identical real-only set
        // with the identical per-repetition seed
        CHECK(cells[8].values == aug_cells[0].values);
    }
    SUBCASE("repetition statistics are consistent") {
        plan.mode = FoldMixPlan::Mode::substitute;
        auto cells = fold_mix_experiment(ds, gen, plan, cfg);
        for (const auto& cell : cells) {
            REQUIRE(cell.values.size() == plan.repetitions);
            double sum = 0.0;
            for (double v : cell.values) sum += v;
            CHECK(cell.mean == doctest::Approx(sum / double(cell.values.size())).epsilon(1e-12));
            CHECK(cell.ci95 >= 0.0);
        }
    }
    SUBCASE("test fold is required") {
        Dataset no_test;
        for (const auto& r : ds.records)
            if (r.fold != 10) no_test.records.push_back(r);
        CHECK_THROWS_AS(fold_mix_experiment(no_test, gen, plan, cfg), Error);
    }
}
