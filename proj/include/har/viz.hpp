#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "har/matrix.hpp"
#include "har/model.hpp"

namespace har::viz {

// Learned sensor weights grouped by true activity.
struct AttentionSummary {
    Matrix per_class_mean;                // M x S; zero row for an absent class
    std::vector<std::vector<double>> raw; // one S-vector per segment
    std::vector<int> labels;              // true label per segment
    std::vector<std::size_t> class_counts;
};

AttentionSummary attention_summary(model::HarModel& model, std::span<const model::Example> examples);

// Gradient-weighted activation mapping: gradients of the target-class
// pre-softmax score w.r.t. each sensor block's concatenated feature maps;
// channel weights are the spatially averaged gradients; the weighted sum
// is relu'd, bilinearly resized to the input grid and min-max rescaled to
// [0,1] (a constant map stays all zero). One C x K map per sensor.
std::vector<Matrix> cam(model::HarModel& model, const model::Example& example, int target_class);

Matrix bilinear_resize(const Matrix& in, std::size_t rows, std::size_t cols);

// Writes <stem>.csv with exact values and <stem>.png rendered with the
// blue-red ramp (hotter = larger). The PNG is derived from the CSV values.
void render_heatmap(const Matrix& m, const std::filesystem::path& dir, const std::string& stem);

Matrix read_matrix_csv(const std::filesystem::path& path);

} // namespace har::viz
