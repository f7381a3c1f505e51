#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "har/model.hpp"

namespace har::train {

struct TrainConfig {
    double lr = 0.001;
    double momentum = 0.9;
    double lambda = 1e-5; // L2 coefficient
    std::size_t batch_size = 64;
    std::size_t epochs = 10;
    std::uint64_t seed = 0;
    bool deterministic = true;

    void validate() const;
};

struct TrainResult {
    std::vector<double> loss_history; // per-epoch mean loss
};

// Shuffled fixed-epoch mini-batch SGD on the cross-entropy + L2 objective.
// Deterministic given the seed. A trailing batch of one sample cannot be
// batch-normalized and is dropped with a warning on stderr.
TrainResult train(model::HarModel& model, std::span<const model::Example> examples, const TrainConfig& cfg);

struct EvalReport {
    std::vector<std::vector<std::int64_t>> confusion; // [truth][prediction]
    std::int64_t sample_count = 0;
    double accuracy = 0.0;
    std::vector<double> precision, recall, f1; // per class
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;

    nlohmann::json to_json() const;
    void write_csv(const std::filesystem::path& path) const;
    void write_confusion_csv(const std::filesystem::path& path) const;
};

// Builds an EvalReport from (truth, prediction) pairs. A class with no
// predicted and no actual positives gets precision = recall = 0.
EvalReport report_from_pairs(std::span<const int> truth, std::span<const int> predicted, std::size_t num_classes);

// Runs inference (running batch-norm statistics) and scores predictions.
EvalReport evaluate(model::HarModel& model, std::span<const model::Example> examples);

std::vector<int> predict(model::HarModel& model, std::span<const model::Example> examples,
                         std::size_t chunk = 256);

// Divides every nonzero row of the confusion matrix by its sum.
Matrix confusion_normalize(const std::vector<std::vector<std::int64_t>>& confusion);

// Windowing + per-segment modality normalization + image transform.
struct PipelineConfig {
    signal::WindowingConfig window;
    signal::ImageKind representation = signal::ImageKind::Dft;
    TrainConfig train;
};

std::vector<model::Example> make_examples(std::span<const data::Recording> recordings,
                                          const data::DatasetMeta& meta, const signal::WindowingConfig& window,
                                          signal::ImageKind kind);

using ModelBuilder = std::function<std::unique_ptr<model::HarModel>(const model::ModelDims&, std::uint64_t seed)>;

struct LosoFold {
    int subject = 0;
    EvalReport report;
    std::vector<double> loss_history;
};

struct LosoResult {
    std::vector<LosoFold> folds;
    EvalReport pooled;          // from the pooled confusion matrix
    double mean_accuracy = 0.0; // unweighted mean over folds
    double mean_macro_f1 = 0.0;
};

// Leave-one-subject-out: one fold per distinct subject id; fold k trains
// on every other subject and tests on subject k. Preprocessing runs
// independently per fold. `jobs` > 1 trains folds on worker threads;
// results are deterministic regardless.
LosoResult loso_cv(const data::Dataset& dataset, const PipelineConfig& cfg, const ModelBuilder& builder,
                   std::size_t jobs = 1);

// Split helpers (recording granularity, so no window ever straddles sets).
struct Split {
    std::vector<data::Recording> train;
    std::vector<data::Recording> test;
};

Split split_by_subjects(std::span<const data::Recording> recordings, std::span<const int> test_subjects);
Split split_random(std::span<const data::Recording> recordings, double test_fraction, std::uint64_t seed);

} // namespace har::train
