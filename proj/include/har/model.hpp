#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "har/dataset.hpp"
#include "har/nn/checkpoint.hpp"
#include "har/nn/tape.hpp"
#include "har/signal.hpp"

namespace har::model {

using nn::Tape;
using ValueId = nn::Tape::ValueId;

// Input geometry of a network: S sensors, images of C x K, M classes.
struct ModelDims {
    std::size_t sensors = 0;
    std::size_t channels = 0;
    std::size_t width = 0;
    std::size_t classes = 0;

    bool operator==(const ModelDims&) const = default;
};

ModelDims dims_for(const data::DatasetMeta& meta, signal::ImageKind kind, std::size_t window_len);

// Multi-kernel feature-extraction block configuration.
struct SensorBlockConfig {
    std::vector<std::pair<std::size_t, std::size_t>> kernel_sizes = {{1, 3}, {3, 3}, {5, 5}};
    std::size_t filters_per_kernel = 8;
    bool use_larger_kernels = false; // adds 7x7 and 9x9 branches

    std::vector<std::pair<std::size_t, std::size_t>> effective_kernels() const;
};

struct ModelConfig {
    SensorBlockConfig sensor_block;
    SensorBlockConfig fusion_block;
    bool shared_sensor_blocks = true;
    std::size_t classifier_hidden = 128;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// One conv branch: conv -> batch norm -> relu.
struct ConvBranch {
    nn::Parameter kernels; // [F, Cin, P, Q]
    nn::Parameter bias;    // [F]
    nn::Parameter gamma;   // [F]
    nn::Parameter beta;    // [F]
    nn::BatchNormState bn;
};

// Parallel conv branches with SAME padding, channel-concatenated, then
// 2x2 max-pooled and flattened to a fixed-length vector.
class FeatureBlock {
public:
    FeatureBlock(const std::string& prefix, std::size_t in_channels, const SensorBlockConfig& cfg,
                 std::mt19937_64& rng);

    struct Out {
        ValueId concat_map; // [N, B*F, H, W] pre-pool (activation-map tap)
        ValueId vec;        // [N, L]
    };
    Out forward(Tape& tape, ValueId x, nn::Mode mode);

    std::size_t out_channels() const;
    static std::size_t vector_length(const SensorBlockConfig& cfg, std::size_t h, std::size_t w);

    void collect(std::vector<nn::Parameter*>& params, std::vector<nn::NamedBuffer>& buffers);

private:
    std::vector<ConvBranch> branches_;
    std::vector<std::pair<std::size_t, std::size_t>> kernels_;
    std::string prefix_;
};

struct DenseLayer {
    nn::Parameter w; // [out, in]
    nn::Parameter b; // [out]
    DenseLayer(const std::string& prefix, std::size_t in, std::size_t out, std::mt19937_64& rng);
    ValueId forward(Tape& tape, ValueId x, nn::Activation act);
};

// Learned sensor-attention parameters: score vector weight, the S x S
// mixing matrix and its bias.
struct AttentionParams {
    nn::Parameter w; // [L]
    nn::Parameter W; // [S, S]
    nn::Parameter b; // [S]
    AttentionParams(const std::string& prefix, std::size_t sensors, std::size_t vec_len, std::mt19937_64& rng);
};

// scores = softmax(tanh(W (F w) + b)) over the sensor axis; F is [N,S,L].
ValueId attention_scores(Tape& tape, ValueId sensor_matrix, AttentionParams& params);

// Row s of the result is scores[:, s] times row s of F.
ValueId apply_attention(Tape& tape, ValueId sensor_matrix, ValueId scores);

// One preprocessed training/evaluation sample.
struct Example {
    signal::SegmentImage image;
    int label = 0;
    int subject_id = 0;
};

// Mini-batch: one [N,1,C,K] tensor per sensor plus labels.
struct Batch {
    std::vector<nn::Tensor> sensor_images;
    std::vector<int> labels;
    std::size_t size() const { return labels.size(); }
};

Batch make_batch(std::span<const Example> examples, std::span<const std::size_t> indices);

enum class ModelVariant { Attention, NoAttention, EarlyFusion, LateFusion };

const char* variant_name(ModelVariant v);
ModelVariant variant_from_name(const std::string& name);

// Everything downstream consumers need from one forward pass.
struct ForwardTrace {
    ValueId probs = Tape::kInvalid;         // [N, M]
    ValueId logits = Tape::kInvalid;        // [N, M] pre-softmax; kInvalid for late fusion
    ValueId attention = Tape::kInvalid;     // [N, S]; kInvalid when the variant has none
    ValueId sensor_matrix = Tape::kInvalid; // [N, S, L]; kInvalid for early fusion
    std::vector<ValueId> sensor_maps;       // per-sensor concat feature maps (empty for early fusion)
};

class HarModel {
public:
    virtual ~HarModel() = default;

    virtual ForwardTrace forward(Tape& tape, const Batch& batch, nn::Mode mode) = 0;
    virtual std::vector<nn::Parameter*> parameters() = 0;
    virtual std::vector<nn::NamedBuffer> buffers() = 0;
    virtual ModelVariant variant() const = 0;
    virtual AttentionParams* attention_params() { return nullptr; }

    const ModelDims& dims() const { return dims_; }
    const ModelConfig& config() const { return config_; }

    nlohmann::json arch_json() const;

protected:
    HarModel(ModelDims dims, ModelConfig config) : dims_(dims), config_(std::move(config)) {}
    void check_batch(const Batch& batch) const;

    ModelDims dims_;
    ModelConfig config_;
};

std::unique_ptr<HarModel> build_model(ModelVariant v, const ModelDims& dims, const ModelConfig& cfg,
                                      std::uint64_t seed);

std::unique_ptr<HarModel> build_attention_model(const ModelDims& dims, const ModelConfig& cfg, std::uint64_t seed);
std::unique_ptr<HarModel> build_no_attention_model(const ModelDims& dims, const ModelConfig& cfg,
                                                   std::uint64_t seed);
std::unique_ptr<HarModel> build_early_fusion_model(const ModelDims& dims, const ModelConfig& cfg,
                                                   std::uint64_t seed);
std::unique_ptr<HarModel> build_late_fusion_model(const ModelDims& dims, const ModelConfig& cfg,
                                                  std::uint64_t seed);

void save_model(const std::filesystem::path& path, HarModel& model);

// Rebuilds the architecture recorded in the checkpoint and restores the
// weights. When `expect` is given, the stored geometry must match.
std::unique_ptr<HarModel> load_model(const std::filesystem::path& path, const ModelDims* expect = nullptr);

} // namespace har::model
