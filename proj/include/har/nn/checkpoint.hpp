#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "har/nn/tensor.hpp"

namespace har::nn {

// Non-trainable named tensor saved alongside parameters (running stats).
struct NamedBuffer {
    std::string name;
    Tensor* tensor = nullptr;
};

// Writes a checkpoint: a JSON document with a caller-supplied header
// (model architecture etc.), every parameter as (name, shape, values) and
// every buffer likewise. Serialization is canonical, so save -> load ->
// save reproduces the file byte for byte.
void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                     std::span<Parameter* const> params, std::span<const NamedBuffer> buffers);

struct Checkpoint {
    nlohmann::json header;
    std::vector<std::pair<std::string, Tensor>> params;
    std::vector<std::pair<std::string, Tensor>> buffers;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies loaded values into the given parameters/buffers, matching by name
// and validating shapes. Throws on a missing name or shape mismatch.
void restore_into(const Checkpoint& ckpt, std::span<Parameter* const> params,
                  std::span<const NamedBuffer> buffers);

} // namespace har::nn
