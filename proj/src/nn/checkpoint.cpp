#include "har/nn/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace har::nn {

namespace {

nlohmann::json tensor_to_json(const std::string& name, const Tensor& t) {
    nlohmann::json j;
    j["name"] = name;
    j["shape"] = t.shape();
    j["values"] = t.values();
    return j;
}

Tensor tensor_from_json(const nlohmann::json& j) {
    Shape shape = j.at("shape").get<Shape>();
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    return Tensor(std::move(shape), std::move(values));
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                     std::span<Parameter* const> params, std::span<const NamedBuffer> buffers) {
    nlohmann::json doc;
    doc["format"] = "har-checkpoint";
    doc["version"] = 1;
    doc["header"] = header;
    doc["params"] = nlohmann::json::array();
    for (const Parameter* p : params) {
        doc["params"].push_back(tensor_to_json(p->name, p->value));
    }
    doc["buffers"] = nlohmann::json::array();
    for (const NamedBuffer& b : buffers) {
        doc["buffers"].push_back(tensor_to_json(b.name, *b.tensor));
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    nlohmann::json doc = nlohmann::json::parse(in);
    if (doc.value("format", "") != "har-checkpoint") {
        throw std::runtime_error("checkpoint: " + path.string() + " is not a checkpoint file");
    }
    if (doc.value("version", 0) != 1) {
        throw std::runtime_error("checkpoint: unsupported version in " + path.string());
    }
    Checkpoint ckpt;
    ckpt.header = doc.at("header");
    for (const auto& j : doc.at("params")) {
        ckpt.params.emplace_back(j.at("name").get<std::string>(), tensor_from_json(j));
    }
    for (const auto& j : doc.at("buffers")) {
        ckpt.buffers.emplace_back(j.at("name").get<std::string>(), tensor_from_json(j));
    }
    return ckpt;
}

void restore_into(const Checkpoint& ckpt, std::span<Parameter* const> params,
                  std::span<const NamedBuffer> buffers) {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, tensor] : ckpt.params) by_name[name] = &tensor;
    for (Parameter* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing parameter " + p->name);
        if (it->second->shape() != p->value.shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name + ": file has " +
                                     Tensor::shape_string(it->second->shape()) + ", model expects " +
                                     Tensor::shape_string(p->value.shape()));
        }
        p->value = *it->second;
        p->zero_grad();
        p->momentum.fill(0.0);
    }

    std::unordered_map<std::string, const Tensor*> buf_by_name;
    for (const auto& [name, tensor] : ckpt.buffers) buf_by_name[name] = &tensor;
    for (const NamedBuffer& b : buffers) {
        auto it = buf_by_name.find(b.name);
        if (it == buf_by_name.end()) throw std::runtime_error("checkpoint: missing buffer " + b.name);
        if (it->second->shape() != b.tensor->shape()) {
            throw std::runtime_error("checkpoint: shape mismatch for buffer " + b.name);
        }
        *b.tensor = *it->second;
    }
}

} // namespace har::nn
