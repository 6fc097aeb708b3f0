#pragma once

#include <functional>
#include <vector>

#include "midt/graph.hpp"
#include "midt/signal_io.hpp"

namespace midt {

// Class of a record = its first diagnostic label (the oracle generator emits
// exactly one, standing in for the clinical superclass).
int record_class(const Record& rec);

struct ClassifierConfig {
    size_t hidden = 16;
    size_t kernel = 5;
    size_t steps = 500;
    size_t batch_size = 16;
    double lr = 1e-2;
    uint64_t seed = 0;
};

// Small 1-D conv classifier: two dilated conv blocks, global average pooling,
// linear head; trained with softmax cross-entropy.
struct Classifier {
    ParameterStore params;
    ClassifierConfig cfg;
    size_t n_classes = 0;
    size_t n_leads = 0;
    double final_loss = 0.0;
    bool trained = false;
};

Classifier train_classifier(const Dataset& train, const ClassifierConfig& cfg);

// Raw per-class logits.
std::vector<double> classifier_scores(const Classifier& clf, const LeadSet& x);
std::vector<double> classifier_probs(const Classifier& clf, const LeadSet& x);  // softmax

// Mann-Whitney AUROC with the half-credit tie rule.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// One-vs-rest AUROC per class, macro-averaged; classes absent from the
// evaluation set are skipped.
double macro_auroc(const Classifier& clf, const Dataset& eval);

// Fraction of synthetic records whose thresholded prediction set contains the
// conditioned class.
double faithfulness(const Dataset& synth, const Classifier& clf, double threshold = 0.5);

// Produces `n_folds` folds' worth of labeled synthetic records.
using SynthFoldGenerator = std::function<Dataset(size_t n_folds, uint64_t seed)>;

struct FoldMixPlan {
    enum class Mode { augment, substitute };
    Mode mode = Mode::substitute;
    size_t repetitions = 5;
    uint64_t seed = 0;
};

struct CellStat {
    size_t folds_added = 0;
    double mean = 0.0;
    double ci95 = 0.0;  // normal approximation over repetitions
    std::vector<double> values;
};

// augment:    cell j trains on 8 real folds + j synthetic folds, j = 0..8
// substitute: cell j trains on j real folds + (8-j) synthetic folds, j = 0..8
// Evaluation is always macro AUROC on the held-out real test fold (fold 10);
// fold 9 is reserved for validation and never trained on.
std::vector<CellStat> fold_mix_experiment(const Dataset& real, const SynthFoldGenerator& gen,
                                          const FoldMixPlan& plan, const ClassifierConfig& clf_cfg);

}  // namespace midt
