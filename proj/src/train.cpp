#include "har/train.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>

#include "har/nn/optim.hpp"

namespace har::train {

using model::Example;
using model::HarModel;

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("train config: lr must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train config: momentum must be in [0,1)");
    if (lambda < 0.0) throw std::invalid_argument("train config: lambda must be >= 0");
    if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be >= 2 (batch norm)");
    if (epochs == 0) throw std::invalid_argument("train config: epochs must be >= 1");
}

TrainResult train(HarModel& model, std::span<const Example> examples, const TrainConfig& cfg) {
    cfg.validate();
    if (examples.size() < 2) throw std::invalid_argument("train: need at least two examples");

    auto params = model.parameters();
    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);

    TrainResult result;
    result.loss_history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
            const std::size_t n = std::min(cfg.batch_size, order.size() - off);
            if (n < 2) {
                std::cerr << "train: dropping trailing batch of 1 sample (batch norm needs >= 2)\n";
                continue;
            }
            model::Batch batch = model::make_batch(examples, std::span(order).subspan(off, n));

            nn::Tape tape;
            auto trace = model.forward(tape, batch, nn::Mode::Train);
            auto loss = tape.cross_entropy_l2(trace.probs, batch.labels, params, cfg.lambda);
            tape.backward(loss);
            nn::sgd_step(params, cfg.lr, cfg.momentum);

            loss_sum += tape.value(loss)[0] * static_cast<double>(n);
            seen += n;
        }
        if (seen == 0) throw std::runtime_error("train: no usable batches");
        result.loss_history.push_back(loss_sum / static_cast<double>(seen));
    }
    return result;
}

// ---------------------------------------------------------------------------
// metrics

EvalReport report_from_pairs(std::span<const int> truth, std::span<const int> predicted,
                             std::size_t num_classes) {
    if (truth.size() != predicted.size()) throw std::invalid_argument("report: size mismatch");
    if (truth.empty()) throw std::invalid_argument("report: no samples");

    EvalReport r;
    r.confusion.assign(num_classes, std::vector<std::int64_t>(num_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = truth[i], p = predicted[i];
        if (t < 0 || static_cast<std::size_t>(t) >= num_classes || p < 0 ||
            static_cast<std::size_t>(p) >= num_classes) {
            throw std::out_of_range("report: label outside [0,M)");
        }
        ++r.confusion[t][p];
    }
    r.sample_count = static_cast<std::int64_t>(truth.size());

    std::int64_t correct = 0;
    for (std::size_t c = 0; c < num_classes; ++c) correct += r.confusion[c][c];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(r.sample_count);

    r.precision.assign(num_classes, 0.0);
    r.recall.assign(num_classes, 0.0);
    r.f1.assign(num_classes, 0.0);
    std::vector<std::int64_t> support(num_classes, 0);
    for (std::size_t c = 0; c < num_classes; ++c) {
        std::int64_t tp = r.confusion[c][c], fp = 0, fn = 0;
        for (std::size_t o = 0; o < num_classes; ++o) {
            if (o == c) continue;
            fp += r.confusion[o][c];
            fn += r.confusion[c][o];
        }
        support[c] = tp + fn;
        r.precision[c] = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        r.recall[c] = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        r.f1[c] = r.precision[c] + r.recall[c] > 0.0
                      ? 2.0 * r.precision[c] * r.recall[c] / (r.precision[c] + r.recall[c])
                      : 0.0;
    }

    for (std::size_t c = 0; c < num_classes; ++c) {
        r.macro_precision += r.precision[c];
        r.macro_recall += r.recall[c];
        r.macro_f1 += r.f1[c];
        const double w = static_cast<double>(support[c]) / static_cast<double>(r.sample_count);
        r.weighted_precision += w * r.precision[c];
        r.weighted_recall += w * r.recall[c];
        r.weighted_f1 += w * r.f1[c];
    }
    r.macro_precision /= static_cast<double>(num_classes);
    r.macro_recall /= static_cast<double>(num_classes);
    r.macro_f1 /= static_cast<double>(num_classes);
    return r;
}

std::vector<int> predict(HarModel& model, std::span<const Example> examples, std::size_t chunk) {
    std::vector<int> out;
    out.reserve(examples.size());
    for (std::size_t off = 0; off < examples.size(); off += chunk) {
        const std::size_t n = std::min(chunk, examples.size() - off);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), off);
        model::Batch batch = model::make_batch(examples, idx);

        nn::Tape tape;
        auto trace = model.forward(tape, batch, nn::Mode::Infer);
        const nn::Tensor& probs = tape.value(trace.probs);
        const std::size_t m = probs.dim(1);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = probs.data() + i * m;
            out.push_back(static_cast<int>(std::max_element(row, row + m) - row));
        }
    }
    return out;
}

EvalReport evaluate(HarModel& model, std::span<const Example> examples) {
    if (examples.empty()) throw std::invalid_argument("evaluate: empty example list");
    std::vector<int> truth;
    truth.reserve(examples.size());
    for (const Example& ex : examples) truth.push_back(ex.label);
    std::vector<int> pred = predict(model, examples);
    return report_from_pairs(truth, pred, model.dims().classes);
}

Matrix confusion_normalize(const std::vector<std::vector<std::int64_t>>& confusion) {
    const std::size_t m = confusion.size();
    Matrix out(m, m == 0 ? 0 : confusion[0].size());
    for (std::size_t r = 0; r < m; ++r) {
        std::int64_t sum = 0;
        for (std::int64_t v : confusion[r]) sum += v;
        if (sum == 0) continue;
        for (std::size_t c = 0; c < confusion[r].size(); ++c) {
            out.at(r, c) = static_cast<double>(confusion[r][c]) / static_cast<double>(sum);
        }
    }
    return out;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json j;
    j["samples"] = sample_count;
    j["accuracy"] = accuracy;
    j["macro"] = {{"precision", macro_precision}, {"recall", macro_recall}, {"f1", macro_f1}};
    j["weighted"] = {{"precision", weighted_precision}, {"recall", weighted_recall}, {"f1", weighted_f1}};
    j["per_class"] = nlohmann::json::array();
    for (std::size_t c = 0; c < precision.size(); ++c) {
        j["per_class"].push_back({{"precision", precision[c]}, {"recall", recall[c]}, {"f1", f1[c]}});
    }
    j["confusion"] = confusion;
    return j;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path.string());
    out.precision(17);
    out << "class,precision,recall,f1\n";
    for (std::size_t c = 0; c < precision.size(); ++c) {
        out << c << "," << precision[c] << "," << recall[c] << "," << f1[c] << "\n";
    }
    out << "macro," << macro_precision << "," << macro_recall << "," << macro_f1 << "\n";
    out << "weighted," << weighted_precision << "," << weighted_recall << "," << weighted_f1 << "\n";
    out << "accuracy," << accuracy << ",,\n";
}

void EvalReport::write_confusion_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("report: cannot write " + path.string());
    for (const auto& row : confusion) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ",";
            out << row[c];
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// pipeline + LOSO

std::vector<Example> make_examples(std::span<const data::Recording> recordings, const data::DatasetMeta& meta,
                                   const signal::WindowingConfig& window, signal::ImageKind kind) {
    std::vector<Example> out;
    for (const data::Recording& rec : recordings) {
        for (const signal::Segment& seg : signal::slide_windows(rec, window, meta.modality_spans)) {
            Example ex;
            ex.label = seg.label;
            ex.subject_id = seg.subject_id;
            ex.image = signal::make_image(signal::normalize_modality(seg), kind);
            out.push_back(std::move(ex));
        }
    }
    return out;
}

Split split_by_subjects(std::span<const data::Recording> recordings, std::span<const int> test_subjects) {
    const std::set<int> test_set(test_subjects.begin(), test_subjects.end());
    Split split;
    for (const data::Recording& rec : recordings) {
        (test_set.count(rec.subject_id) ? split.test : split.train).push_back(rec);
    }
    return split;
}

Split split_random(std::span<const data::Recording> recordings, double test_fraction, std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) {
        throw std::invalid_argument("split_random: fraction must be in (0,1)");
    }
    std::vector<std::size_t> order(recordings.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t test_count = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                                static_cast<double>(recordings.size()) * test_fraction));
    Split split;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < test_count ? split.test : split.train).push_back(recordings[order[i]]);
    }
    return split;
}

LosoResult loso_cv(const data::Dataset& dataset, const PipelineConfig& cfg, const ModelBuilder& builder,
                   std::size_t jobs) {
    std::set<int> subject_set;
    for (const data::Recording& rec : dataset.recordings) subject_set.insert(rec.subject_id);
    if (subject_set.size() < 2) throw std::invalid_argument("loso_cv: need at least two subjects");

    const std::vector<int> subjects(subject_set.begin(), subject_set.end());
    LosoResult result;
    result.folds.resize(subjects.size());

    auto run_fold = [&](std::size_t k) {
        const int test_subject = subjects[k];
        Split split = split_by_subjects(dataset.recordings, std::span(&test_subject, 1));
        if (split.test.empty()) throw std::runtime_error("loso_cv: subject has no recordings");

        auto train_examples = make_examples(split.train, dataset.meta, cfg.window, cfg.representation);
        auto test_examples = make_examples(split.test, dataset.meta, cfg.window, cfg.representation);

        const model::ModelDims dims =
            model::dims_for(dataset.meta, cfg.representation, cfg.window.window_len);
        auto model = builder(dims, cfg.train.seed);

        TrainResult trained = train(*model, train_examples, cfg.train);

        LosoFold& fold = result.folds[k];
        fold.subject = test_subject;
        fold.report = evaluate(*model, test_examples);
        fold.loss_history = std::move(trained.loss_history);
    };

    if (jobs <= 1) {
        for (std::size_t k = 0; k < subjects.size(); ++k) run_fold(k);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(subjects.size());
        for (std::size_t base = 0; base < subjects.size(); base += jobs) {
            const std::size_t batch = std::min(jobs, subjects.size() - base);
            for (std::size_t i = 0; i < batch; ++i) {
                pool.emplace_back([&, k = base + i] {
                    try {
                        run_fold(k);
                    } catch (...) {
                        errors[k] = std::current_exception();
                    }
                });
            }
            for (std::thread& t : pool) t.join();
            pool.clear();
        }
        for (const auto& err : errors) {
            if (err) std::rethrow_exception(err);
        }
    }

    // Pool the confusion matrices and average fold metrics.
    const std::size_t m = dataset.meta.num_classes;
    std::vector<int> truth, pred;
    for (const LosoFold& fold : result.folds) {
        result.mean_accuracy += fold.report.accuracy;
        result.mean_macro_f1 += fold.report.macro_f1;
        for (std::size_t t = 0; t < m; ++t)
            for (std::size_t p = 0; p < m; ++p)
                for (std::int64_t i = 0; i < fold.report.confusion[t][p]; ++i) {
                    truth.push_back(static_cast<int>(t));
                    pred.push_back(static_cast<int>(p));
                }
    }
    result.mean_accuracy /= static_cast<double>(result.folds.size());
    result.mean_macro_f1 /= static_cast<double>(result.folds.size());
    result.pooled = report_from_pairs(truth, pred, m);
    return result;
}

} // namespace har::train
