#include "midt/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "midt/denoiser.hpp"

namespace midt {

int record_class(const Record& rec) {
    if (rec.meta.diagnostic_labels.empty())
        throw Error("record_class: record carries no diagnostic label");
    return rec.meta.diagnostic_labels[0];
}

static int classifier_forward_node(Graph& g, ParameterStore& ps, int x_node /* {C, L} */) {
    size_t L = g.value(x_node).shape[1];
    int h = g.tanh_(g.conv1d(x_node, g.param(ps, "clf.conv0"), 1));
    h = g.tanh_(g.conv1d(h, g.param(ps, "clf.conv1"), 2));
    int pooled = g.scale(g.matmul(h, g.constant(Tensor::full({L, 1}, 1.0))), 1.0 / double(L));
    return g.matmul(g.param(ps, "clf.head"), pooled);  // {n_classes, 1}
}

static void init_classifier(ParameterStore& ps, const ClassifierConfig& cfg, size_t n_leads,
                            size_t n_classes, uint64_t seed) {
    Rng rng(seed);
    auto randn = [&](std::vector<size_t> shape, double std_) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (auto& v : t.data) v = std_ * rng.normal();
        return t;
    };
    ps.add("clf.conv0", randn({cfg.hidden, n_leads, cfg.kernel}, 0.2));
    ps.add("clf.conv1", randn({cfg.hidden, cfg.hidden, cfg.kernel}, 0.2));
    ps.add("clf.head", randn({n_classes, cfg.hidden}, 0.2));
}

Classifier train_classifier(const Dataset& train, const ClassifierConfig& cfg) {
    if (train.empty()) throw Error("train_classifier: empty dataset");
    std::set<int> classes;
    for (const auto& r : train.records) classes.insert(record_class(r));
    if (classes.size() < 2) throw Error("train_classifier: need at least 2 classes");
    size_t n_classes = size_t(*classes.rbegin()) + 1;

    Classifier clf;
    clf.cfg = cfg;
    clf.n_classes = n_classes;
    clf.n_leads = train.records[0].leads.n_leads();
    init_classifier(clf.params, cfg, clf.n_leads, n_classes, Rng(cfg.seed).fork(0x636C66).next_u64());

    for (size_t step = 0; step < cfg.steps; ++step) {
        Rng rng = Rng(cfg.seed).fork(step);
        GradMap acc;
        double loss_sum = 0.0;
        for (size_t b = 0; b < cfg.batch_size; ++b) {
            const Record& rec = train.records[rng.uniform_int(train.size())];
            int y = record_class(rec);
            Graph g;
            int x = g.constant(to_channels_major(rec.leads.samples));
            int s = classifier_forward_node(g, clf.params, x);
            // cross-entropy: log sum exp(s) - s_y
            int log_z = g.log_floor(g.sum(g.exp_(s)), 1e-300);
            int loss = g.sub(log_z, g.slice(s, size_t(y), 1));
            g.backward(loss);
            loss_sum += g.value(loss).data[0];
            for (auto& [name, grad] : g.param_grads()) {
                auto it = acc.find(name);
                if (it == acc.end())
                    acc.emplace(name, grad);
                else
                    for (size_t i = 0; i < grad.size(); ++i) it->second.data[i] += grad.data[i];
            }
        }
        for (auto& [name, grad] : acc)
            for (auto& v : grad.data) v /= double(cfg.batch_size);
        adam_step(clf.params, acc, cfg.lr);
        clf.final_loss = loss_sum / double(cfg.batch_size);
        if (!std::isfinite(clf.final_loss))
            throw Error("train_classifier: non-finite loss at step " + std::to_string(step));
    }
    clf.trained = true;
    return clf;
}

std::vector<double> classifier_scores(const Classifier& clf, const LeadSet& x) {
    if (!clf.trained) throw Error("classifier_scores: classifier is not trained");
    Graph g;
    auto& ps = const_cast<ParameterStore&>(clf.params);
    int xn = g.constant(to_channels_major(x.samples));
    int s = classifier_forward_node(g, ps, xn);
    return g.value(s).data;
}

std::vector<double> classifier_probs(const Classifier& clf, const LeadSet& x) {
    auto s = classifier_scores(clf, x);
    double mx = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double& v : s) {
        v = std::exp(v - mx);
        z += v;
    }
    for (double& v : s) v /= z;
    return s;
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw Error("auroc: scores/labels length mismatch");
    size_t n_pos = 0, n_neg = 0;
    for (int l : labels) (l ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) throw Error("auroc: one class is absent");

    // rank-sum with midranks for ties
    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * double(i + 1 + j);  // ranks are 1-based
        for (size_t k = i; k < j; ++k)
            if (labels[order[k]]) rank_sum_pos += midrank;
        i = j;
    }
    double u = rank_sum_pos - double(n_pos) * double(n_pos + 1) / 2.0;
    return u / (double(n_pos) * double(n_neg));
}

double macro_auroc(const Classifier& clf, const Dataset& eval) {
    if (eval.empty()) throw Error("macro_auroc: empty evaluation set");
    std::vector<std::vector<double>> all_scores;
    std::vector<int> classes;
    all_scores.reserve(eval.size());
    for (const auto& r : eval.records) {
        all_scores.push_back(classifier_scores(clf, r.leads));
        classes.push_back(record_class(r));
    }
    std::set<int> present(classes.begin(), classes.end());
    double acc = 0.0;
    size_t used = 0;
    for (int c : present) {
        std::vector<double> s(eval.size());
        std::vector<int> y(eval.size());
        bool has_neg = false;
        for (size_t k = 0; k < eval.size(); ++k) {
            s[k] = size_t(c) < all_scores[k].size() ? all_scores[k][size_t(c)] : 0.0;
            y[k] = classes[k] == c ? 1 : 0;
            has_neg |= y[k] == 0;
        }
        if (!has_neg) continue;
        acc += auroc(s, y);
        ++used;
    }
    if (used == 0) throw Error("macro_auroc: evaluation set has a single class");
    return acc / double(used);
}

double faithfulness(const Dataset& synth, const Classifier& clf, double threshold) {
    if (!clf.trained) throw Error("faithfulness: classifier is not trained");
    if (synth.empty()) throw Error("faithfulness: empty synthetic set");
    size_t hits = 0;
    for (const auto& r : synth.records) {
        auto p = classifier_probs(clf, r.leads);
        int c = record_class(r);
        if (size_t(c) < p.size() && p[size_t(c)] > threshold) ++hits;
    }
    return double(hits) / double(synth.size());
}

std::vector<CellStat> fold_mix_experiment(const Dataset& real, const SynthFoldGenerator& gen,
                                          const FoldMixPlan& plan, const ClassifierConfig& clf_cfg) {
    const std::vector<int> base_folds = {1, 2, 3, 4, 5, 6, 7, 8};
    Dataset test = subset_by_folds(real, {10});
    if (test.empty()) throw Error("fold_mix_experiment: empty test fold");
    if (subset_by_folds(real, base_folds).empty())
        throw Error("fold_mix_experiment: insufficient folds");

    std::vector<CellStat> cells;
    for (size_t j = 0; j <= 8; ++j) {
        CellStat cell;
        cell.folds_added = j;
        for (size_t rep = 0; rep < plan.repetitions; ++rep) {
            // seed depends on the repetition only, so cells with identical
            // training sets reproduce identical runs
            uint64_t rep_seed = Rng(plan.seed).fork(rep).next_u64();
            Dataset train_set;
            if (plan.mode == FoldMixPlan::Mode::augment) {
                train_set = subset_by_folds(real, base_folds);
                if (j > 0) {
                    Dataset synth = gen(j, rep_seed);
                    for (auto& r : synth.records) train_set.records.push_back(std::move(r));
                }
            } else {
                std::vector<int> real_folds(base_folds.begin(), base_folds.begin() + long(j));
                train_set = subset_by_folds(real, real_folds);
                if (j < 8) {
                    Dataset synth = gen(8 - j, rep_seed);
                    for (auto& r : synth.records) train_set.records.push_back(std::move(r));
                }
            }
            ClassifierConfig cfg = clf_cfg;
            cfg.seed = rep_seed;
            Classifier clf = train_classifier(train_set, cfg);
            cell.values.push_back(macro_auroc(clf, test));
        }
        double sum = 0.0;
        for (double v : cell.values) sum += v;
        cell.mean = sum / double(cell.values.size());
        if (cell.values.size() > 1) {
            double ss = 0.0;
            for (double v : cell.values) ss += (v - cell.mean) * (v - cell.mean);
            double sd = std::sqrt(ss / double(cell.values.size() - 1));
            cell.ci95 = 1.96 * sd / std::sqrt(double(cell.values.size()));
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

}  // namespace midt
