#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "har/dataset.hpp"
#include "har/model.hpp"
#include "har/train.hpp"

namespace har::cli {

struct DatasetSource {
    enum class Type { Daily, Csv, Synth };
    Type type = Type::Synth;
    std::filesystem::path path; // daily root / csv manifest / synth spec file
    std::uint64_t synth_seed = 0;
};

// One experiment, fully described by a versioned config file. Command-line
// flags override individual fields.
struct ExperimentConfig {
    DatasetSource dataset;
    signal::WindowingConfig window{32, 8};
    signal::ImageKind representation = signal::ImageKind::Dft;
    model::ModelVariant variant = model::ModelVariant::Attention;
    model::ModelConfig model;
    train::TrainConfig train;
    double holdout_fraction = 0.0;     // > 0: random recording-level split
    std::vector<int> holdout_subjects; // else: these subjects (default: highest id)
    std::filesystem::path output_dir = "out";

    nlohmann::json to_json() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);

data::SynthSpec load_synth_spec(const std::filesystem::path& path);
nlohmann::json synth_spec_to_json(const data::SynthSpec& spec);

data::Dataset load_dataset(const DatasetSource& source);

// Entry point shared by the binary and the tests. `args` excludes the
// program name. Errors are reported as one JSON object on `err` and a
// nonzero return.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace har::cli
