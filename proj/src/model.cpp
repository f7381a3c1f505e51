#include "har/model.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace har::model {

using nn::Activation;
using nn::Mode;
using nn::Padding2d;
using nn::Parameter;
using nn::Tensor;

namespace {

// Kaiming-uniform fan-in initialization.
Tensor kaiming_uniform(const nn::Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
    return t;
}

} // namespace

ModelDims dims_for(const data::DatasetMeta& meta, signal::ImageKind kind, std::size_t window_len) {
    ModelDims d;
    d.sensors = meta.num_sensors;
    d.channels = meta.num_channels;
    d.width = signal::image_width(kind, window_len);
    d.classes = meta.num_classes;
    return d;
}

std::vector<std::pair<std::size_t, std::size_t>> SensorBlockConfig::effective_kernels() const {
    auto ks = kernel_sizes;
    if (use_larger_kernels) {
        ks.push_back({7, 7});
        ks.push_back({9, 9});
    }
    if (ks.empty()) throw std::invalid_argument("sensor block: at least one kernel size required");
    if (filters_per_kernel == 0) throw std::invalid_argument("sensor block: filters_per_kernel must be >= 1");
    return ks;
}

nlohmann::json ModelConfig::to_json() const {
    nlohmann::json j;
    j["sensor_kernels"] = sensor_block.kernel_sizes;
    j["sensor_filters"] = sensor_block.filters_per_kernel;
    j["sensor_larger_kernels"] = sensor_block.use_larger_kernels;
    j["fusion_kernels"] = fusion_block.kernel_sizes;
    j["fusion_filters"] = fusion_block.filters_per_kernel;
    j["fusion_larger_kernels"] = fusion_block.use_larger_kernels;
    j["shared_sensor_blocks"] = shared_sensor_blocks;
    j["classifier_hidden"] = classifier_hidden;
    return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.sensor_block.kernel_sizes = j.at("sensor_kernels").get<std::vector<std::pair<std::size_t, std::size_t>>>();
    c.sensor_block.filters_per_kernel = j.at("sensor_filters").get<std::size_t>();
    c.sensor_block.use_larger_kernels = j.at("sensor_larger_kernels").get<bool>();
    c.fusion_block.kernel_sizes = j.at("fusion_kernels").get<std::vector<std::pair<std::size_t, std::size_t>>>();
    c.fusion_block.filters_per_kernel = j.at("fusion_filters").get<std::size_t>();
    c.fusion_block.use_larger_kernels = j.at("fusion_larger_kernels").get<bool>();
    c.shared_sensor_blocks = j.at("shared_sensor_blocks").get<bool>();
    c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
    return c;
}

// ---------------------------------------------------------------------------
// FeatureBlock

FeatureBlock::FeatureBlock(const std::string& prefix, std::size_t in_channels, const SensorBlockConfig& cfg,
                           std::mt19937_64& rng)
    : kernels_(cfg.effective_kernels()), prefix_(prefix) {
    const std::size_t f = cfg.filters_per_kernel;
    branches_.reserve(kernels_.size());
    for (std::size_t b = 0; b < kernels_.size(); ++b) {
        const auto [p, q] = kernels_[b];
        const std::string bp = prefix + ".branch" + std::to_string(b);
        ConvBranch branch{
            Parameter(bp + ".kernels", kaiming_uniform({f, in_channels, p, q}, in_channels * p * q, rng), true),
            Parameter(bp + ".bias", Tensor({f}), false),
            Parameter(bp + ".gamma", Tensor::full({f}, 1.0), false),
            Parameter(bp + ".beta", Tensor({f}), false),
            nn::BatchNormState(f),
        };
        branches_.push_back(std::move(branch));
    }
}

std::size_t FeatureBlock::out_channels() const {
    return branches_.size() * branches_[0].kernels.value.dim(0);
}

FeatureBlock::Out FeatureBlock::forward(Tape& tape, ValueId x, Mode mode) {
    std::vector<ValueId> outs;
    outs.reserve(branches_.size());
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        ConvBranch& br = branches_[b];
        const auto [p, q] = kernels_[b];
        ValueId y = tape.conv2d(x, tape.param(br.kernels), tape.param(br.bias), Padding2d::same(p, q));
        y = tape.batch_norm(y, tape.param(br.gamma), tape.param(br.beta), br.bn, mode);
        y = tape.relu(y);
        outs.push_back(y);
    }
    ValueId cat = tape.concat_channels(outs);
    ValueId pooled = tape.max_pool2x2(cat);
    const auto& shape = tape.value(pooled).shape();
    ValueId vec = tape.reshape(pooled, {shape[0], shape[1] * shape[2] * shape[3]});
    return {cat, vec};
}

std::size_t FeatureBlock::vector_length(const SensorBlockConfig& cfg, std::size_t h, std::size_t w) {
    const std::size_t channels = cfg.effective_kernels().size() * cfg.filters_per_kernel;
    const std::size_t oh = h / (h >= 2 ? 2 : 1);
    const std::size_t ow = w / (w >= 2 ? 2 : 1);
    return channels * oh * ow;
}

void FeatureBlock::collect(std::vector<Parameter*>& params, std::vector<nn::NamedBuffer>& buffers) {
    for (std::size_t b = 0; b < branches_.size(); ++b) {
        ConvBranch& br = branches_[b];
        params.push_back(&br.kernels);
        params.push_back(&br.bias);
        params.push_back(&br.gamma);
        params.push_back(&br.beta);
        const std::string bp = prefix_ + ".branch" + std::to_string(b);
        buffers.push_back({bp + ".bn.mean", &br.bn.mean});
        buffers.push_back({bp + ".bn.var", &br.bn.var});
    }
}

// ---------------------------------------------------------------------------
// DenseLayer / AttentionParams

DenseLayer::DenseLayer(const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng)
    : w(prefix + ".w", kaiming_uniform({out, in}, in, rng), true), b(prefix + ".b", Tensor({out}), false) {}

ValueId DenseLayer::forward(Tape& tape, ValueId x, Activation act) {
    return tape.dense(x, tape.param(w), tape.param(b), act);
}

namespace {

// Identity start for the sensor-mixing matrix: each sensor's activation
// begins as a monotone function of its own evidence score, which gives
// the attention a self-weighting starting point instead of random mixing.
Tensor identity_matrix(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t[i * n + i] = 1.0;
    return t;
}

} // namespace

AttentionParams::AttentionParams(const std::string& prefix, std::size_t sensors, std::size_t vec_len,
                                 std::mt19937_64& rng)
    : w(prefix + ".w", kaiming_uniform({vec_len}, vec_len, rng), true),
      W(prefix + ".W", identity_matrix(sensors), true),
      b(prefix + ".b", Tensor({sensors}), false) {}

ValueId attention_scores(Tape& tape, ValueId sensor_matrix, AttentionParams& params) {
    ValueId raw = tape.rows_dot(sensor_matrix, tape.param(params.w));
    ValueId activated = tape.dense(raw, tape.param(params.W), tape.param(params.b), Activation::Tanh);
    return tape.softmax_rows(activated);
}

ValueId apply_attention(Tape& tape, ValueId sensor_matrix, ValueId scores) {
    return tape.row_scale(sensor_matrix, scores);
}

// ---------------------------------------------------------------------------
// batches

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("make_batch: empty index list");
    const Example& first = examples[indices[0]];
    const std::size_t s = first.image.num_sensors();
    const std::size_t c = first.image.height();
    const std::size_t k = first.image.width();
    const std::size_t n = indices.size();

    Batch batch;
    batch.labels.reserve(n);
    batch.sensor_images.assign(s, Tensor({n, 1, c, k}));
    for (std::size_t bi = 0; bi < n; ++bi) {
        const Example& ex = examples[indices[bi]];
        if (ex.image.num_sensors() != s || ex.image.height() != c || ex.image.width() != k) {
            throw std::invalid_argument("make_batch: inconsistent image shapes");
        }
        for (std::size_t si = 0; si < s; ++si) {
            std::memcpy(batch.sensor_images[si].data() + bi * c * k, ex.image.images[si].data(),
                        c * k * sizeof(double));
        }
        batch.labels.push_back(ex.label);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// HarModel base

const char* variant_name(ModelVariant v) {
    switch (v) {
        case ModelVariant::Attention: return "attention";
        case ModelVariant::NoAttention: return "no-attention";
        case ModelVariant::EarlyFusion: return "early";
        case ModelVariant::LateFusion: return "late";
    }
    return "?";
}

ModelVariant variant_from_name(const std::string& name) {
    if (name == "attention") return ModelVariant::Attention;
    if (name == "no-attention") return ModelVariant::NoAttention;
    if (name == "early") return ModelVariant::EarlyFusion;
    if (name == "late") return ModelVariant::LateFusion;
    throw std::invalid_argument("unknown model variant '" + name + "'");
}

nlohmann::json HarModel::arch_json() const {
    nlohmann::json j;
    j["variant"] = variant_name(variant());
    j["dims"] = {{"sensors", dims_.sensors},
                 {"channels", dims_.channels},
                 {"width", dims_.width},
                 {"classes", dims_.classes}};
    j["config"] = config_.to_json();
    return j;
}

void HarModel::check_batch(const Batch& batch) const {
    if (batch.sensor_images.size() != dims_.sensors) {
        throw std::invalid_argument("forward: expected " + std::to_string(dims_.sensors) + " sensor inputs, got " +
                                    std::to_string(batch.sensor_images.size()));
    }
    for (const Tensor& t : batch.sensor_images) {
        if (t.rank() != 4 || t.dim(1) != 1 || t.dim(2) != dims_.channels || t.dim(3) != dims_.width ||
            t.dim(0) != batch.labels.size()) {
            throw std::invalid_argument("forward: sensor image shape " + Tensor::shape_string(t.shape()) +
                                        " does not match model geometry");
        }
    }
}

// ---------------------------------------------------------------------------
// Fusion network (learned or uniform attention)

namespace {

class FusionNetwork final : public HarModel {
public:
    FusionNetwork(ModelDims dims, ModelConfig cfg, std::uint64_t seed, bool learned_attention)
        : HarModel(dims, std::move(cfg)), learned_attention_(learned_attention) {
        std::mt19937_64 rng(seed);
        vec_len_ = FeatureBlock::vector_length(config_.sensor_block, dims_.channels, dims_.width);

        if (config_.shared_sensor_blocks) {
            sensor_blocks_.emplace_back("sensor", 1, config_.sensor_block, rng);
        } else {
            for (std::size_t s = 0; s < dims_.sensors; ++s) {
                sensor_blocks_.emplace_back("sensor" + std::to_string(s), 1, config_.sensor_block, rng);
            }
        }
        if (learned_attention_) {
            attention_.emplace("attention", dims_.sensors, vec_len_, rng);
        }
        std::size_t fused_len = vec_len_;
        if (dims_.sensors > 1) {
            fusion_block_.emplace("fusion", 1, config_.fusion_block, rng);
            fused_len = FeatureBlock::vector_length(config_.fusion_block, dims_.sensors, vec_len_);
        }
        hidden_.emplace("classifier.hidden", fused_len, config_.classifier_hidden, rng);
        out_.emplace("classifier.out", config_.classifier_hidden, dims_.classes, rng);
    }

    ForwardTrace forward(Tape& tape, const Batch& batch, Mode mode) override {
        check_batch(batch);
        const std::size_t n = batch.size();
        const std::size_t s = dims_.sensors;

        ForwardTrace trace;
        std::vector<ValueId> vecs;
        vecs.reserve(s);
        for (std::size_t si = 0; si < s; ++si) {
            FeatureBlock& blk = config_.shared_sensor_blocks ? sensor_blocks_[0] : sensor_blocks_[si];
            ValueId x = tape.input(batch.sensor_images[si]);
            auto out = blk.forward(tape, x, mode);
            trace.sensor_maps.push_back(out.concat_map);
            vecs.push_back(out.vec);
        }
        ValueId f = tape.stack_rows(vecs);
        trace.sensor_matrix = f;

        ValueId scores;
        if (learned_attention_) {
            scores = attention_scores(tape, f, *attention_);
        } else {
            scores = tape.input(Tensor::full({n, s}, 1.0 / static_cast<double>(s)));
        }
        trace.attention = scores;
        ValueId fhat = apply_attention(tape, f, scores);

        ValueId fused;
        if (s == 1) {
            fused = tape.reshape(fhat, {n, vec_len_});
        } else {
            ValueId img = tape.reshape(fhat, {n, 1, s, vec_len_});
            fused = fusion_block_->forward(tape, img, mode).vec;
        }

        ValueId hid = hidden_->forward(tape, fused, Activation::Relu);
        trace.logits = out_->forward(tape, hid, Activation::None);
        trace.probs = tape.softmax_rows(trace.logits);
        return trace;
    }

    std::vector<Parameter*> parameters() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return params;
    }

    std::vector<nn::NamedBuffer> buffers() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return buffers;
    }

    ModelVariant variant() const override {
        return learned_attention_ ? ModelVariant::Attention : ModelVariant::NoAttention;
    }

    AttentionParams* attention_params() override { return attention_ ? &*attention_ : nullptr; }

private:
    void collect(std::vector<Parameter*>& params, std::vector<nn::NamedBuffer>& buffers) {
        for (FeatureBlock& blk : sensor_blocks_) blk.collect(params, buffers);
        if (attention_) {
            params.push_back(&attention_->w);
            params.push_back(&attention_->W);
            params.push_back(&attention_->b);
        }
        if (fusion_block_) fusion_block_->collect(params, buffers);
        params.push_back(&hidden_->w);
        params.push_back(&hidden_->b);
        params.push_back(&out_->w);
        params.push_back(&out_->b);
    }

    bool learned_attention_;
    std::size_t vec_len_ = 0;
    std::vector<FeatureBlock> sensor_blocks_;
    std::optional<AttentionParams> attention_;
    std::optional<FeatureBlock> fusion_block_;
    std::optional<DenseLayer> hidden_;
    std::optional<DenseLayer> out_;
};

// ---------------------------------------------------------------------------
// Early fusion: sensors stacked on the channel axis of a single input.

class EarlyFusionNetwork final : public HarModel {
public:
    EarlyFusionNetwork(ModelDims dims, ModelConfig cfg, std::uint64_t seed) : HarModel(dims, std::move(cfg)) {
        std::mt19937_64 rng(seed);
        block_.emplace("stacked", dims_.sensors, config_.sensor_block, rng);
        const std::size_t len = FeatureBlock::vector_length(config_.sensor_block, dims_.channels, dims_.width);
        hidden_.emplace("classifier.hidden", len, config_.classifier_hidden, rng);
        out_.emplace("classifier.out", config_.classifier_hidden, dims_.classes, rng);
    }

    ForwardTrace forward(Tape& tape, const Batch& batch, Mode mode) override {
        check_batch(batch);
        std::vector<ValueId> per_sensor;
        per_sensor.reserve(dims_.sensors);
        for (const Tensor& img : batch.sensor_images) per_sensor.push_back(tape.input(img));
        ValueId stacked = tape.concat_channels(per_sensor); // [N, S, C, K]

        ForwardTrace trace;
        ValueId vec = block_->forward(tape, stacked, mode).vec;
        ValueId hid = hidden_->forward(tape, vec, Activation::Relu);
        trace.logits = out_->forward(tape, hid, Activation::None);
        trace.probs = tape.softmax_rows(trace.logits);
        return trace;
    }

    std::vector<Parameter*> parameters() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return params;
    }

    std::vector<nn::NamedBuffer> buffers() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return buffers;
    }

    ModelVariant variant() const override { return ModelVariant::EarlyFusion; }

private:
    void collect(std::vector<Parameter*>& params, std::vector<nn::NamedBuffer>& buffers) {
        block_->collect(params, buffers);
        params.push_back(&hidden_->w);
        params.push_back(&hidden_->b);
        params.push_back(&out_->w);
        params.push_back(&out_->b);
    }

    std::optional<FeatureBlock> block_;
    std::optional<DenseLayer> hidden_;
    std::optional<DenseLayer> out_;
};

// ---------------------------------------------------------------------------
// Late fusion: one independent network per sensor, probabilities averaged.

class LateFusionNetwork final : public HarModel {
public:
    LateFusionNetwork(ModelDims dims, ModelConfig cfg, std::uint64_t seed) : HarModel(dims, std::move(cfg)) {
        std::mt19937_64 rng(seed);
        const std::size_t len = FeatureBlock::vector_length(config_.sensor_block, dims_.channels, dims_.width);
        for (std::size_t s = 0; s < dims_.sensors; ++s) {
            const std::string prefix = "net" + std::to_string(s);
            blocks_.emplace_back(prefix + ".block", 1, config_.sensor_block, rng);
            hidden_.emplace_back(prefix + ".hidden", len, config_.classifier_hidden, rng);
            out_.emplace_back(prefix + ".out", config_.classifier_hidden, dims_.classes, rng);
        }
    }

    ForwardTrace forward(Tape& tape, const Batch& batch, Mode mode) override {
        check_batch(batch);
        ForwardTrace trace;
        ValueId sum = Tape::kInvalid;
        for (std::size_t s = 0; s < dims_.sensors; ++s) {
            ValueId x = tape.input(batch.sensor_images[s]);
            auto blk = blocks_[s].forward(tape, x, mode);
            trace.sensor_maps.push_back(blk.concat_map);
            ValueId hid = hidden_[s].forward(tape, blk.vec, Activation::Relu);
            ValueId logits = out_[s].forward(tape, hid, Activation::None);
            ValueId probs = tape.softmax_rows(logits);
            sum = s == 0 ? probs : tape.add(sum, probs);
        }
        trace.probs = tape.scale(sum, 1.0 / static_cast<double>(dims_.sensors));
        return trace;
    }

    std::vector<Parameter*> parameters() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return params;
    }

    std::vector<nn::NamedBuffer> buffers() override {
        std::vector<Parameter*> params;
        std::vector<nn::NamedBuffer> buffers;
        collect(params, buffers);
        return buffers;
    }

    ModelVariant variant() const override { return ModelVariant::LateFusion; }

private:
    void collect(std::vector<Parameter*>& params, std::vector<nn::NamedBuffer>& buffers) {
        for (std::size_t s = 0; s < blocks_.size(); ++s) {
            blocks_[s].collect(params, buffers);
            params.push_back(&hidden_[s].w);
            params.push_back(&hidden_[s].b);
            params.push_back(&out_[s].w);
            params.push_back(&out_[s].b);
        }
    }

    std::vector<FeatureBlock> blocks_;
    std::vector<DenseLayer> hidden_;
    std::vector<DenseLayer> out_;
};

} // namespace

// ---------------------------------------------------------------------------
// builders + checkpointing

std::unique_ptr<HarModel> build_model(ModelVariant v, const ModelDims& dims, const ModelConfig& cfg,
                                      std::uint64_t seed) {
    if (dims.sensors == 0 || dims.channels == 0 || dims.width == 0 || dims.classes == 0) {
        throw std::invalid_argument("build_model: all dims must be positive");
    }
    switch (v) {
        case ModelVariant::Attention: return std::make_unique<FusionNetwork>(dims, cfg, seed, true);
        case ModelVariant::NoAttention: return std::make_unique<FusionNetwork>(dims, cfg, seed, false);
        case ModelVariant::EarlyFusion: return std::make_unique<EarlyFusionNetwork>(dims, cfg, seed);
        case ModelVariant::LateFusion: return std::make_unique<LateFusionNetwork>(dims, cfg, seed);
    }
    throw std::invalid_argument("build_model: bad variant");
}

std::unique_ptr<HarModel> build_attention_model(const ModelDims& d, const ModelConfig& c, std::uint64_t seed) {
    return build_model(ModelVariant::Attention, d, c, seed);
}
std::unique_ptr<HarModel> build_no_attention_model(const ModelDims& d, const ModelConfig& c, std::uint64_t seed) {
    return build_model(ModelVariant::NoAttention, d, c, seed);
}
std::unique_ptr<HarModel> build_early_fusion_model(const ModelDims& d, const ModelConfig& c, std::uint64_t seed) {
    return build_model(ModelVariant::EarlyFusion, d, c, seed);
}
std::unique_ptr<HarModel> build_late_fusion_model(const ModelDims& d, const ModelConfig& c, std::uint64_t seed) {
    return build_model(ModelVariant::LateFusion, d, c, seed);
}

void save_model(const std::filesystem::path& path, HarModel& model) {
    auto params = model.parameters();
    auto buffers = model.buffers();
    nn::save_checkpoint(path, model.arch_json(), params, buffers);
}

std::unique_ptr<HarModel> load_model(const std::filesystem::path& path, const ModelDims* expect) {
    nn::Checkpoint ckpt = nn::load_checkpoint(path);
    const nlohmann::json& arch = ckpt.header;

    ModelDims dims;
    dims.sensors = arch.at("dims").at("sensors").get<std::size_t>();
    dims.channels = arch.at("dims").at("channels").get<std::size_t>();
    dims.width = arch.at("dims").at("width").get<std::size_t>();
    dims.classes = arch.at("dims").at("classes").get<std::size_t>();
    if (expect && !(dims == *expect)) {
        throw std::runtime_error("load_model: checkpoint geometry does not match the dataset");
    }

    ModelConfig cfg = ModelConfig::from_json(arch.at("config"));
    auto model = build_model(variant_from_name(arch.at("variant").get<std::string>()), dims, cfg, 0);

    auto params = model->parameters();
    auto buffers = model->buffers();
    nn::restore_into(ckpt, params, buffers);
    return model;
}

} // namespace har::model
