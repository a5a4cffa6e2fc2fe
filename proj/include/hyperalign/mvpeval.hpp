#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hyperalign/aligncore.hpp"
#include "hyperalign/datamodel.hpp"
#include "hyperalign/trainer.hpp"

namespace hyperalign {

/// One-vs-rest ridge regression. Stands in for the ν-SVM used in the
/// original experiments; the classifier is not what is being compared.
struct LinearModel {
    Matrix weights;  // k × C
    Vector bias;     // C
    int num_classes = 0;
};

LinearModel train_classifier(const Matrix& features, std::span<const int> labels, int num_classes,
                             double lambda = 1.0);

struct Prediction {
    std::vector<int> labels;
    Matrix scores;  // N × C
};

/// argmax of affine scores, ties to the lowest class id.
Prediction predict(const LinearModel& model, const Matrix& features);

double accuracy_percent(std::span<const int> predicted, std::span<const int> truth);

/// Mann-Whitney AUC in percent; tied scores get half credit.
double auc_binary(std::span<const double> scores, std::span<const bool> positive);

struct AucResult {
    double auc = 0.0;                // macro average over valid classes, percent
    std::vector<int> skipped_classes;  // no positives or no negatives
};

AucResult auc_macro(const Matrix& scores, std::span<const int> truth);

enum class Method { Identity, Classical, Ldha };

const char* to_string(Method m) noexcept;
Method parse_method(const std::string& name);

struct EvalConfig {
    Method method = Method::Ldha;
    SolverConfig solver;  // mode is overridden by `method`
    SweepConfig sweep;
    double classifier_lambda = 1.0;
    int workers = 1;
};

struct FoldResult {
    std::string held_out_subject_id;
    double accuracy = 0.0;
    double auc = 0.0;
    double train_isc = 0.0;  // mean pairwise ISC of the mapped training subjects
    int sweeps = 0;
    bool converged = false;
};

struct EvalReport {
    std::string method;
    double accuracy = 0.0;      // mean over folds, percent
    double accuracy_std = 0.0;  // sample std over folds
    double auc = 0.0;
    double auc_std = 0.0;
    double mean_train_isc = 0.0;
    double chance = 0.0;  // 100 / num_classes
    int num_classes = 0;
    Eigen::Index t = 0;
    Eigen::Index v = 0;
    std::vector<FoldResult> per_fold;  // dataset subject order
    EvalConfig config;
};

/// Leave-one-subject-out: fit on the remaining subjects, align the held-out
/// subject to the template without labels, classify its mapped rows.
EvalReport loso_evaluate(const LabeledDataset& ds, const EvalConfig& cfg);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace hyperalign
