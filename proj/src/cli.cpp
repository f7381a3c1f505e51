#include "har/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <set>

#include "har/png_io.hpp"
#include "har/viz.hpp"

namespace har::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
    throw std::runtime_error("config: field '" + field + "': " + what);
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& ctx) {
    if (!j.contains(key)) config_error(ctx + key, "missing");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(ctx + key, e.what());
    }
}

template <typename T>
T get_field_or(const json& j, const std::string& key, const std::string& ctx, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(ctx + key, e.what());
    }
}

json parse_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

} // namespace

// ---------------------------------------------------------------------------
// config files

json ExperimentConfig::to_json() const {
    json j;
    j["version"] = 1;
    switch (dataset.type) {
        case DatasetSource::Type::Daily: j["dataset"] = {{"type", "daily"}, {"root", dataset.path.string()}}; break;
        case DatasetSource::Type::Csv: j["dataset"] = {{"type", "csv"}, {"manifest", dataset.path.string()}}; break;
        case DatasetSource::Type::Synth:
            j["dataset"] = {{"type", "synth"}, {"spec", dataset.path.string()}, {"seed", dataset.synth_seed}};
            break;
    }
    j["window"] = {{"length", window.window_len}, {"stride", window.stride}};
    j["representation"] = signal::image_kind_name(representation);
    j["model"] = model.to_json();
    j["model"]["variant"] = model::variant_name(variant);
    j["train"] = {{"lr", train.lr},           {"momentum", train.momentum},
                  {"lambda", train.lambda},   {"batch_size", train.batch_size},
                  {"epochs", train.epochs},   {"seed", train.seed},
                  {"deterministic", train.deterministic}};
    j["eval"] = {{"holdout_fraction", holdout_fraction}, {"holdout_subjects", holdout_subjects}};
    j["output_dir"] = output_dir.string();
    return j;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    const json j = parse_json_file(path);
    if (get_field_or<int>(j, "version", "", 1) != 1) config_error("version", "unsupported config version");

    ExperimentConfig cfg;
    const json jd = get_field<json>(j, "dataset", "");
    const std::string type = get_field<std::string>(jd, "type", "dataset.");
    if (type == "daily") {
        cfg.dataset.type = DatasetSource::Type::Daily;
        cfg.dataset.path = get_field<std::string>(jd, "root", "dataset.");
    } else if (type == "csv") {
        cfg.dataset.type = DatasetSource::Type::Csv;
        cfg.dataset.path = get_field<std::string>(jd, "manifest", "dataset.");
    } else if (type == "synth") {
        cfg.dataset.type = DatasetSource::Type::Synth;
        cfg.dataset.path = get_field<std::string>(jd, "spec", "dataset.");
        cfg.dataset.synth_seed = get_field_or<std::uint64_t>(jd, "seed", "dataset.", 0);
    } else {
        config_error("dataset.type", "must be daily|csv|synth");
    }

    if (j.contains("window")) {
        const json jw = j.at("window");
        cfg.window.window_len = get_field<std::size_t>(jw, "length", "window.");
        cfg.window.stride = get_field<std::size_t>(jw, "stride", "window.");
    }
    cfg.representation =
        signal::image_kind_from_name(get_field_or<std::string>(j, "representation", "", "dft"));

    if (j.contains("model")) {
        const json jm = j.at("model");
        cfg.variant = model::variant_from_name(get_field_or<std::string>(jm, "variant", "model.", "attention"));
        cfg.model.sensor_block.filters_per_kernel =
            get_field_or<std::size_t>(jm, "filters", "model.", cfg.model.sensor_block.filters_per_kernel);
        cfg.model.fusion_block.filters_per_kernel = cfg.model.sensor_block.filters_per_kernel;
        cfg.model.sensor_block.use_larger_kernels = get_field_or<bool>(jm, "larger_kernels", "model.", false);
        cfg.model.shared_sensor_blocks = get_field_or<bool>(jm, "shared_blocks", "model.", true);
        cfg.model.classifier_hidden = get_field_or<std::size_t>(jm, "hidden", "model.", 128);
    }

    if (j.contains("train")) {
        const json jt = j.at("train");
        cfg.train.lr = get_field_or<double>(jt, "lr", "train.", cfg.train.lr);
        cfg.train.momentum = get_field_or<double>(jt, "momentum", "train.", cfg.train.momentum);
        cfg.train.lambda = get_field_or<double>(jt, "lambda", "train.", cfg.train.lambda);
        cfg.train.batch_size = get_field_or<std::size_t>(jt, "batch_size", "train.", cfg.train.batch_size);
        cfg.train.epochs = get_field_or<std::size_t>(jt, "epochs", "train.", cfg.train.epochs);
        cfg.train.seed = get_field_or<std::uint64_t>(jt, "seed", "train.", cfg.train.seed);
        cfg.train.deterministic = get_field_or<bool>(jt, "deterministic", "train.", true);
    }

    if (j.contains("eval")) {
        const json je = j.at("eval");
        cfg.holdout_fraction = get_field_or<double>(je, "holdout_fraction", "eval.", 0.0);
        cfg.holdout_subjects = get_field_or<std::vector<int>>(je, "holdout_subjects", "eval.", {});
    }
    cfg.output_dir = get_field_or<std::string>(j, "output_dir", "", "out");
    return cfg;
}

data::SynthSpec load_synth_spec(const fs::path& path) {
    const json j = parse_json_file(path);
    data::SynthSpec spec;
    spec.num_sensors = get_field<std::size_t>(j, "sensors", "synth.");
    spec.num_channels = get_field<std::size_t>(j, "channels", "synth.");
    spec.num_classes = get_field<std::size_t>(j, "classes", "synth.");
    spec.num_subjects = get_field<std::size_t>(j, "subjects", "synth.");
    spec.recordings_per_class = get_field<std::size_t>(j, "recordings_per_class", "synth.");
    spec.total_frames = get_field<std::size_t>(j, "frames", "synth.");
    spec.sample_rate_hz = get_field<int>(j, "rate_hz", "synth.");
    spec.noise_std = get_field_or<double>(j, "noise_std", "synth.", 0.0);
    if (j.contains("signatures")) {
        for (const json& js : j.at("signatures")) {
            data::ClassSinusoid sin;
            const int cls = get_field<int>(js, "class", "synth.signatures.");
            sin.sensor = get_field<std::size_t>(js, "sensor", "synth.signatures.");
            sin.channel = get_field<std::size_t>(js, "channel", "synth.signatures.");
            sin.frequency_hz = get_field<double>(js, "freq", "synth.signatures.");
            sin.amplitude = get_field_or<double>(js, "amp", "synth.signatures.", 1.0);
            spec.signatures[cls].push_back(sin);
        }
    }
    if (j.contains("relevant_sensor")) {
        for (const json& jr : j.at("relevant_sensor")) {
            spec.relevant_sensor[get_field<int>(jr, "class", "synth.relevant_sensor.")] =
                get_field<std::size_t>(jr, "sensor", "synth.relevant_sensor.");
        }
    }
    if (j.contains("distractors")) {
        const json jd = j.at("distractors");
        spec.distractor_amplitude = get_field<double>(jd, "amplitude", "synth.distractors.");
        for (const json& jp : get_field<json>(jd, "pools", "synth.distractors.")) {
            spec.distractor_pool[get_field<std::size_t>(jp, "sensor", "synth.distractors.pools.")] =
                get_field<std::vector<double>>(jp, "freqs", "synth.distractors.pools.");
        }
    }
    spec.validate();
    return spec;
}

json synth_spec_to_json(const data::SynthSpec& spec) {
    json j;
    j["sensors"] = spec.num_sensors;
    j["channels"] = spec.num_channels;
    j["classes"] = spec.num_classes;
    j["subjects"] = spec.num_subjects;
    j["recordings_per_class"] = spec.recordings_per_class;
    j["frames"] = spec.total_frames;
    j["rate_hz"] = spec.sample_rate_hz;
    j["noise_std"] = spec.noise_std;
    j["signatures"] = json::array();
    for (const auto& [cls, sins] : spec.signatures) {
        for (const data::ClassSinusoid& sin : sins) {
            j["signatures"].push_back({{"class", cls},
                                       {"sensor", sin.sensor},
                                       {"channel", sin.channel},
                                       {"freq", sin.frequency_hz},
                                       {"amp", sin.amplitude}});
        }
    }
    j["relevant_sensor"] = json::array();
    for (const auto& [cls, sensor] : spec.relevant_sensor) {
        j["relevant_sensor"].push_back({{"class", cls}, {"sensor", sensor}});
    }
    if (!spec.distractor_pool.empty()) {
        j["distractors"]["amplitude"] = spec.distractor_amplitude;
        j["distractors"]["pools"] = json::array();
        for (const auto& [sensor, freqs] : spec.distractor_pool) {
            j["distractors"]["pools"].push_back({{"sensor", sensor}, {"freqs", freqs}});
        }
    }
    return j;
}

data::Dataset load_dataset(const DatasetSource& source) {
    switch (source.type) {
        case DatasetSource::Type::Daily: return data::load_daily_dataset(source.path);
        case DatasetSource::Type::Csv: return data::load_csv_dataset(source.path);
        case DatasetSource::Type::Synth:
            return data::synth_generate(load_synth_spec(source.path), source.synth_seed);
    }
    throw std::runtime_error("bad dataset source");
}

// ---------------------------------------------------------------------------
// commands

namespace {

struct PreparedData {
    std::vector<model::Example> train_examples;
    std::vector<model::Example> test_examples;
    model::ModelDims dims;
};

PreparedData prepare_split(const ExperimentConfig& cfg, const data::Dataset& ds) {
    std::set<int> subjects;
    for (const data::Recording& r : ds.recordings) subjects.insert(r.subject_id);

    train::Split split;
    if (cfg.holdout_fraction > 0.0 || subjects.size() < 2) {
        const double fraction = cfg.holdout_fraction > 0.0 ? cfg.holdout_fraction : 0.2;
        split = train::split_random(ds.recordings, fraction, cfg.train.seed);
    } else {
        std::vector<int> held = cfg.holdout_subjects;
        if (held.empty()) held.push_back(*subjects.rbegin());
        split = train::split_by_subjects(ds.recordings, held);
        if (split.test.empty() || split.train.empty()) {
            throw std::runtime_error("holdout subjects leave an empty train or test set");
        }
    }

    PreparedData prep;
    prep.train_examples = train::make_examples(split.train, ds.meta, cfg.window, cfg.representation);
    prep.test_examples = train::make_examples(split.test, ds.meta, cfg.window, cfg.representation);
    prep.dims = model::dims_for(ds.meta, cfg.representation, cfg.window.window_len);
    return prep;
}

void write_run_manifest(const fs::path& dir, const std::string& command, const ExperimentConfig& cfg) {
    fs::create_directories(dir);
    json j;
    j["command"] = command;
    j["config"] = cfg.to_json();
    j["library_version"] = kVersion;
    std::ofstream out(dir / "run.json");
    out << j.dump(2) << "\n";
}

void write_history_csv(const fs::path& path, const std::vector<double>& history) {
    std::ofstream out(path);
    out.precision(17);
    out << "epoch,mean_loss\n";
    for (std::size_t e = 0; e < history.size(); ++e) out << e + 1 << "," << history[e] << "\n";
}

void print_report(std::ostream& out, const std::string& tag, const train::EvalReport& r) {
    out << tag << ": accuracy=" << r.accuracy << " macro_p=" << r.macro_precision
        << " macro_r=" << r.macro_recall << " macro_f1=" << r.macro_f1 << " (n=" << r.sample_count << ")\n";
}

int cmd_train(const ExperimentConfig& cfg, std::ostream& out) {
    const data::Dataset ds = load_dataset(cfg.dataset);
    PreparedData prep = prepare_split(cfg, ds);
    write_run_manifest(cfg.output_dir, "train", cfg);

    auto net = model::build_model(cfg.variant, prep.dims, cfg.model, cfg.train.seed);
    train::TrainResult trained = train::train(*net, prep.train_examples, cfg.train);
    train::EvalReport report = train::evaluate(*net, prep.test_examples);

    model::save_model(cfg.output_dir / "model.ckpt.json", *net);
    write_history_csv(cfg.output_dir / "history.csv", trained.loss_history);
    report.write_csv(cfg.output_dir / "metrics.csv");
    report.write_confusion_csv(cfg.output_dir / "confusion.csv");
    std::ofstream(cfg.output_dir / "metrics.json") << report.to_json().dump(2) << "\n";

    print_report(out, "held-out", report);
    out << "checkpoint: " << (cfg.output_dir / "model.ckpt.json").string() << "\n";
    return 0;
}

int cmd_loso(const ExperimentConfig& cfg, std::size_t jobs, std::ostream& out) {
    const data::Dataset ds = load_dataset(cfg.dataset);
    write_run_manifest(cfg.output_dir, "loso", cfg);

    train::PipelineConfig pipeline{cfg.window, cfg.representation, cfg.train};
    auto builder = [&](const model::ModelDims& dims, std::uint64_t seed) {
        return model::build_model(cfg.variant, dims, cfg.model, seed);
    };
    train::LosoResult result = train::loso_cv(ds, pipeline, builder, jobs);

    json agg;
    agg["mean_accuracy"] = result.mean_accuracy;
    agg["mean_macro_f1"] = result.mean_macro_f1;
    agg["folds"] = json::array();
    for (const train::LosoFold& fold : result.folds) {
        fold.report.write_csv(cfg.output_dir / ("fold_subject" + std::to_string(fold.subject) + ".csv"));
        agg["folds"].push_back({{"subject", fold.subject}, {"report", fold.report.to_json()}});
        print_report(out, "subject " + std::to_string(fold.subject), fold.report);
    }
    agg["pooled"] = result.pooled.to_json();
    std::ofstream(cfg.output_dir / "loso.json") << agg.dump(2) << "\n";
    result.pooled.write_confusion_csv(cfg.output_dir / "confusion_pooled.csv");
    viz::render_heatmap(train::confusion_normalize(result.pooled.confusion), cfg.output_dir,
                        "confusion_pooled_normalized");

    print_report(out, "pooled", result.pooled);
    out << "mean fold accuracy: " << result.mean_accuracy << "\n";
    return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& axis, std::ostream& out) {
    const data::Dataset ds = load_dataset(cfg.dataset);
    if (ds.recordings.empty()) throw std::runtime_error("ablate: dataset has no recordings");
    write_run_manifest(cfg.output_dir, "ablate-" + axis, cfg);

    std::ofstream csv(cfg.output_dir / ("ablate_" + axis + ".csv"));
    csv.precision(17);

    auto run_once = [&](const ExperimentConfig& c) {
        PreparedData prep = prepare_split(c, ds);
        auto net = model::build_model(c.variant, prep.dims, c.model, c.train.seed);
        train::train(*net, prep.train_examples, c.train);
        return train::evaluate(*net, prep.test_examples);
    };
    auto metrics_cols = [](const train::EvalReport& r) {
        std::ostringstream os;
        os.precision(17);
        os << r.accuracy << "," << r.macro_precision << "," << r.macro_recall << "," << r.macro_f1 << ","
           << r.weighted_precision << "," << r.weighted_recall << "," << r.weighted_f1;
        return os.str();
    };
    const std::string metric_header =
        "accuracy,macro_precision,macro_recall,macro_f1,weighted_precision,weighted_recall,weighted_f1";

    if (axis == "representation") {
        csv << "representation,input_height,input_width," << metric_header << "\n";
        for (signal::ImageKind kind : {signal::ImageKind::Raw, signal::ImageKind::Dct, signal::ImageKind::Dft}) {
            ExperimentConfig c = cfg;
            c.representation = kind;
            const train::EvalReport r = run_once(c);
            csv << signal::image_kind_name(kind) << "," << ds.meta.num_channels << ","
                << signal::image_width(kind, c.window.window_len) << "," << metrics_cols(r) << "\n";
            print_report(out, signal::image_kind_name(kind), r);
        }
    } else if (axis == "segment") {
        std::size_t min_frames = ds.recordings.front().total_frames();
        for (const data::Recording& r : ds.recordings) min_frames = std::min(min_frames, r.total_frames());
        std::vector<std::pair<std::size_t, std::size_t>> grid = {{32, 8},  {32, 16}, {32, 24},
                                                                 {64, 16}, {64, 32}, {96, 24}};
        grid.push_back({min_frames, min_frames}); // whole-sequence row
        csv << "length,stride,status," << metric_header << "\n";
        for (const auto& [len, stride] : grid) {
            ExperimentConfig c = cfg;
            c.window = {len, stride};
            if (len > min_frames || (c.representation == signal::ImageKind::Dft && len % 2 != 0)) {
                csv << len << "," << stride << ",skipped,,,,,,,\n";
                out << "T=" << len << " stride=" << stride << ": skipped (incompatible with recordings)\n";
                continue;
            }
            const train::EvalReport r = run_once(c);
            csv << len << "," << stride << ",ok," << metrics_cols(r) << "\n";
            print_report(out, "T=" + std::to_string(len) + " stride=" + std::to_string(stride), r);
        }
    } else if (axis == "fusion") {
        csv << "fusion," << metric_header << "\n";
        for (model::ModelVariant v : {model::ModelVariant::EarlyFusion, model::ModelVariant::LateFusion,
                                      model::ModelVariant::Attention}) {
            ExperimentConfig c = cfg;
            c.variant = v;
            const train::EvalReport r = run_once(c);
            csv << model::variant_name(v) << "," << metrics_cols(r) << "\n";
            print_report(out, model::variant_name(v), r);
        }
    } else {
        throw std::runtime_error("ablate: axis must be representation|segment|fusion");
    }
    out << "table: " << (cfg.output_dir / ("ablate_" + axis + ".csv")).string() << "\n";
    return 0;
}

int cmd_viz(const ExperimentConfig& cfg, const fs::path& checkpoint, std::ostream& out) {
    const data::Dataset ds = load_dataset(cfg.dataset);
    PreparedData prep = prepare_split(cfg, ds);
    write_run_manifest(cfg.output_dir, "viz", cfg);

    auto net = model::load_model(checkpoint, &prep.dims);
    const auto& examples = prep.test_examples.empty() ? prep.train_examples : prep.test_examples;

    // Confusion matrix of the restored model.
    train::EvalReport report = train::evaluate(*net, examples);
    report.write_confusion_csv(cfg.output_dir / "confusion.csv");
    viz::render_heatmap(train::confusion_normalize(report.confusion), cfg.output_dir, "confusion_normalized");
    std::ofstream(cfg.output_dir / "metrics.json") << report.to_json().dump(2) << "\n";
    print_report(out, "viz split", report);

    // Per-activity attention heatmap.
    if (net->variant() == model::ModelVariant::Attention || net->variant() == model::ModelVariant::NoAttention) {
        viz::AttentionSummary summary = viz::attention_summary(*net, examples);
        viz::render_heatmap(summary.per_class_mean, cfg.output_dir, "attention_mean");
        std::ofstream raw(cfg.output_dir / "attention_raw.csv");
        raw.precision(17);
        raw << "label";
        for (std::size_t s = 0; s < net->dims().sensors; ++s) raw << ",sensor" << s;
        raw << "\n";
        for (std::size_t i = 0; i < summary.raw.size(); ++i) {
            raw << summary.labels[i];
            for (double v : summary.raw[i]) raw << "," << v;
            raw << "\n";
        }
        out << "attention heatmap: " << (cfg.output_dir / "attention_mean.png").string() << "\n";
    }

    // One activation map per (first example of class, sensor).
    if (net->variant() != model::ModelVariant::EarlyFusion && net->variant() != model::ModelVariant::LateFusion) {
        std::set<int> done;
        for (const model::Example& ex : examples) {
            if (!done.insert(ex.label).second) continue;
            auto maps = viz::cam(*net, ex, ex.label);
            for (std::size_t s = 0; s < maps.size(); ++s) {
                viz::render_heatmap(maps[s], cfg.output_dir,
                                    "cam_class" + std::to_string(ex.label) + "_sensor" + std::to_string(s));
            }
        }
        out << "activation maps written to " << cfg.output_dir.string() << "\n";
    }
    return 0;
}

int cmd_synth(const fs::path& spec_path, std::uint64_t seed, const fs::path& out_dir, std::ostream& out) {
    const data::SynthSpec spec = load_synth_spec(spec_path);
    const data::Dataset ds = data::synth_generate(spec, seed);
    data::write_csv_dataset(out_dir, ds);

    json j;
    j["command"] = "synth";
    j["spec"] = synth_spec_to_json(spec);
    j["seed"] = seed;
    j["library_version"] = kVersion;
    std::ofstream(out_dir / "run.json") << j.dump(2) << "\n";

    out << "wrote " << ds.recordings.size() << " recordings to " << out_dir.string() << "\n";
    return 0;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Attention-based multi-IMU activity recognition"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir_override;
    std::int64_t seed_override = -1;
    std::size_t jobs = 1;
    bool deterministic = false;

    auto add_common = [&](CLI::App* sub, bool config_required = true) {
        auto* opt = sub->add_option("--config", config_path, "experiment config file (JSON)");
        if (config_required) opt->required();
        sub->add_option("--seed", seed_override, "override the training seed");
        sub->add_option("--jobs", jobs, "worker threads for fold-parallel work");
        sub->add_flag("--deterministic", deterministic, "force deterministic execution");
        sub->add_option("--out", out_dir_override, "override the output directory");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train one model and score a held-out split");
    add_common(train_cmd);

    CLI::App* loso_cmd = app.add_subcommand("loso", "leave-one-subject-out cross validation");
    add_common(loso_cmd);

    std::string axis;
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep one experiment axis");
    add_common(ablate_cmd);
    ablate_cmd->add_option("--axis", axis, "representation|segment|fusion")->required();

    std::string checkpoint;
    CLI::App* viz_cmd = app.add_subcommand("viz", "attention and activation-map artifacts");
    add_common(viz_cmd);
    viz_cmd->add_option("--checkpoint", checkpoint, "model checkpoint (default <out>/model.ckpt.json)");

    std::string spec_path;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset as CSV");
    synth_cmd->add_option("--spec", spec_path, "synthetic dataset spec (JSON)")->required();
    std::uint64_t synth_seed = 0;
    synth_cmd->add_option("--seed", synth_seed, "generator seed");
    std::string synth_out = "synth_out";
    synth_cmd->add_option("--out", synth_out, "output directory");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << json{{"error", e.what()}}.dump() << "\n";
        return 2;
    }

    try {
        if (synth_cmd->parsed()) return cmd_synth(spec_path, synth_seed, synth_out, out);

        ExperimentConfig cfg = load_experiment_config(config_path);
        if (seed_override >= 0) cfg.train.seed = static_cast<std::uint64_t>(seed_override);
        if (deterministic) cfg.train.deterministic = true;
        if (!out_dir_override.empty()) cfg.output_dir = out_dir_override;

        if (train_cmd->parsed()) return cmd_train(cfg, out);
        if (loso_cmd->parsed()) return cmd_loso(cfg, jobs, out);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg, axis, out);
        if (viz_cmd->parsed()) {
            const fs::path ckpt = checkpoint.empty() ? cfg.output_dir / "model.ckpt.json" : fs::path(checkpoint);
            return cmd_viz(cfg, ckpt, out);
        }
        err << json{{"error", "no command"}}.dump() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << json{{"error", e.what()}}.dump() << "\n";
        return 1;
    }
}

} // namespace har::cli
