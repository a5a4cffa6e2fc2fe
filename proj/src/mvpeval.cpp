#include "hyperalign/mvpeval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "hyperalign/error.hpp"

namespace hyperalign {

LinearModel train_classifier(const Matrix& features, std::span<const int> labels, int num_classes, double lambda) {
    const Eigen::Index n = features.rows();
    if (static_cast<std::size_t>(n) != labels.size()) throw InvalidInput("train_classifier: label count mismatch");
    if (n == 0) throw InvalidInput("train_classifier: no samples");
    if (!features.allFinite()) throw InvalidInput("train_classifier: non-finite features");
    if (!(lambda >= 0.0)) throw InvalidInput("train_classifier: lambda must be >= 0");
    if (num_classes < 2) throw InvalidInput("train_classifier: need at least 2 classes");

    std::vector<int> present(static_cast<std::size_t>(num_classes), 0);
    for (int y : labels) {
        if (y < 0 || y >= num_classes) throw InvalidInput("train_classifier: label out of range");
        present[static_cast<std::size_t>(y)] = 1;
    }
    if (std::accumulate(present.begin(), present.end(), 0) < 2)
        throw InvalidInput("train_classifier: only one class present");

    // Unpenalized intercept: solve on centered features, recover the bias.
    const Eigen::RowVectorXd mean = features.colwise().mean();
    const Matrix centered = features.rowwise() - mean;
    Matrix targets = Matrix::Constant(n, num_classes, -1.0);
    for (Eigen::Index i = 0; i < n; ++i) targets(i, labels[static_cast<std::size_t>(i)]) = 1.0;

    const Eigen::Index k = features.cols();
    Matrix gram = centered.transpose() * centered;
    gram.diagonal().array() += lambda;
    const Matrix rhs = centered.transpose() * targets;

    LinearModel model;
    model.num_classes = num_classes;
    if (k == 0) {
        model.weights.resize(0, num_classes);
    } else {
        Eigen::LDLT<Matrix> ldlt(gram);
        model.weights = ldlt.solve(rhs);
        if (ldlt.info() != Eigen::Success || !model.weights.allFinite()) {
            // lambda = 0 with rank-deficient features
            model.weights = gram.completeOrthogonalDecomposition().solve(rhs);
        }
    }
    model.bias = (targets.colwise().mean() - mean * model.weights).transpose();
    return model;
}

Prediction predict(const LinearModel& model, const Matrix& features) {
    if (features.cols() != model.weights.rows())
        throw InvalidInput("predict: feature width " + std::to_string(features.cols()) + " but model expects " +
                           std::to_string(model.weights.rows()));
    Prediction out;
    out.scores = (features * model.weights).rowwise() + model.bias.transpose();
    out.labels.resize(static_cast<std::size_t>(features.rows()));
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        int best = 0;
        for (int c = 1; c < model.num_classes; ++c)
            if (out.scores(i, c) > out.scores(i, best)) best = c;
        out.labels[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

double accuracy_percent(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size() || truth.empty()) throw InvalidInput("accuracy: size mismatch");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(truth.size());
}

double auc_binary(std::span<const double> scores, std::span<const bool> positive) {
    if (scores.size() != positive.size()) throw InvalidInput("auc: size mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Mid-ranks (1-based) so ties share credit.
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m)
            if (positive[order[m]]) {
                pos_rank_sum += mid;
                ++n_pos;
            }
        i = j + 1;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw InvalidInput("auc: need at least one positive and one negative");
    const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return 100.0 * u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AucResult auc_macro(const Matrix& scores, std::span<const int> truth) {
    if (static_cast<std::size_t>(scores.rows()) != truth.size()) throw InvalidInput("auc_macro: size mismatch");
    AucResult out;
    double sum = 0.0;
    int valid = 0;
    std::vector<double> col(truth.size());
    // std::vector<bool> has no contiguous storage for std::span.
    auto positive = std::make_unique<bool[]>(truth.size());
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < truth.size(); ++i) {
            col[i] = scores(static_cast<Eigen::Index>(i), c);
            positive[i] = truth[i] == c;
            n_pos += positive[i] ? 1 : 0;
        }
        if (n_pos == 0 || n_pos == truth.size()) {
            out.skipped_classes.push_back(static_cast<int>(c));
            continue;
        }
        sum += auc_binary(col, std::span<const bool>(positive.get(), truth.size()));
        ++valid;
    }
    if (valid == 0) throw InvalidInput("auc_macro: no class has both positives and negatives");
    out.auc = sum / valid;
    return out;
}

const char* to_string(Method m) noexcept {
    switch (m) {
        case Method::Identity: return "identity";
        case Method::Classical: return "classical";
        case Method::Ldha: return "ldha";
    }
    return "?";
}

Method parse_method(const std::string& name) {
    if (name == "identity") return Method::Identity;
    if (name == "classical") return Method::Classical;
    if (name == "ldha") return Method::Ldha;
    throw InvalidInput("unknown method '" + name + "' (expected identity, classical or ldha)");
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Matrix stack_rows(const std::vector<Matrix>& blocks) {
    Eigen::Index rows = 0;
    for (const auto& b : blocks) rows += b.rows();
    Matrix out(rows, blocks.front().cols());
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
        out.middleRows(at, b.rows()) = b;
        at += b.rows();
    }
    return out;
}

FoldResult run_fold(const LabeledDataset& ds, std::size_t held_out, const EvalConfig& cfg) {
    const LabelVector& labels = *ds.labels();
    std::vector<SubjectData> train_subjects;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (i != held_out) train_subjects.push_back(ds.subjects()[i]);
    const LabeledDataset train(std::move(train_subjects), labels);
    const SubjectData& test = ds.subjects()[held_out];

    FoldResult fold;
    fold.held_out_subject_id = test.id();

    std::vector<Matrix> train_features;
    Matrix test_features;
    if (cfg.method == Method::Identity) {
        for (const auto& s : train.subjects()) train_features.push_back(s.x());
        test_features = test.x();
        fold.train_isc = mean_pairwise_isc(train_features);
        fold.converged = true;
    } else {
        SolverConfig solver = cfg.solver;
        solver.mode = cfg.method == Method::Classical ? SolverMode::Classical : SolverMode::Ldha;
        const TrainResult trained = fit(train, solver, cfg.sweep);
        for (std::size_t i = 0; i < train.size(); ++i)
            train_features.push_back(train.subjects()[i].x() * trained.maps[i].r);
        // Test side: only the data and the template, never the labels.
        const AlignmentMap test_map = align_test_subject(test, trained.tmpl);
        test_features = test.x() * test_map.r;
        fold.train_isc = trained.objective_trace.empty() ? mean_pairwise_isc(train_features)
                                                         : trained.objective_trace.back();
        fold.sweeps = trained.sweeps;
        fold.converged = trained.converged;
    }

    std::vector<int> train_labels;
    for (std::size_t i = 0; i < train.size(); ++i) train_labels.insert(train_labels.end(), labels.y().begin(), labels.y().end());

    const LinearModel model =
        train_classifier(stack_rows(train_features), train_labels, labels.num_classes(), cfg.classifier_lambda);
    const Prediction pred = predict(model, test_features);
    fold.accuracy = accuracy_percent(pred.labels, labels.y());
    fold.auc = auc_macro(pred.scores, labels.y()).auc;
    return fold;
}

}  // namespace

EvalReport loso_evaluate(const LabeledDataset& ds, const EvalConfig& cfg) {
    if (ds.size() < 3) throw InvalidInput("loso_evaluate: need at least 3 subjects, got " + std::to_string(ds.size()));
    if (!ds.labels()) throw InvalidInput("loso_evaluate: dataset has no labels");
    if (ds.labels()->num_classes() < 2) throw InvalidInput("loso_evaluate: need at least 2 classes");

    EvalReport report;
    report.method = to_string(cfg.method);
    report.config = cfg;
    report.num_classes = ds.labels()->num_classes();
    report.chance = 100.0 / report.num_classes;
    report.t = ds.t();
    report.v = ds.v();
    report.per_fold.resize(ds.size());

    parallel_for(ds.size(), cfg.workers, [&](std::size_t h) { report.per_fold[h] = run_fold(ds, h, cfg); });

    std::vector<double> acc, auc, isc_values;
    for (const auto& f : report.per_fold) {
        acc.push_back(f.accuracy);
        auc.push_back(f.auc);
        isc_values.push_back(f.train_isc);
    }
    report.accuracy = mean_of(acc);
    report.accuracy_std = sample_std(acc);
    report.auc = mean_of(auc);
    report.auc_std = sample_std(auc);
    report.mean_train_isc = mean_of(isc_values);
    spdlog::info("loso {}: acc {:.2f} auc {:.2f} (chance {:.1f})", report.method, report.accuracy, report.auc,
                 report.chance);
    return report;
}

}  // namespace hyperalign
