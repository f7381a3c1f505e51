#include "har/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "har/png_io.hpp"

namespace har::viz {

using model::Example;
using model::HarModel;

AttentionSummary attention_summary(HarModel& model, std::span<const Example> examples) {
    if (examples.empty()) throw std::invalid_argument("attention_summary: no examples");
    const std::size_t s = model.dims().sensors;
    const std::size_t m = model.dims().classes;

    AttentionSummary summary;
    summary.per_class_mean = Matrix(m, s);
    summary.class_counts.assign(m, 0);

    constexpr std::size_t kChunk = 256;
    for (std::size_t off = 0; off < examples.size(); off += kChunk) {
        const std::size_t n = std::min(kChunk, examples.size() - off);
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), off);
        model::Batch batch = model::make_batch(examples, idx);

        nn::Tape tape;
        auto trace = model.forward(tape, batch, nn::Mode::Infer);
        if (trace.attention == nn::Tape::kInvalid) {
            throw std::invalid_argument("attention_summary: model variant has no sensor attention");
        }
        const nn::Tensor& att = tape.value(trace.attention);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row(att.data() + i * s, att.data() + (i + 1) * s);
            const int label = batch.labels[i];
            if (label < 0 || static_cast<std::size_t>(label) >= m) {
                throw std::out_of_range("attention_summary: label outside [0,M)");
            }
            for (std::size_t si = 0; si < s; ++si) summary.per_class_mean.at(label, si) += row[si];
            ++summary.class_counts[label];
            summary.raw.push_back(std::move(row));
            summary.labels.push_back(label);
        }
    }

    for (std::size_t cls = 0; cls < m; ++cls) {
        if (summary.class_counts[cls] == 0) continue;
        for (std::size_t si = 0; si < s; ++si) {
            summary.per_class_mean.at(cls, si) /= static_cast<double>(summary.class_counts[cls]);
        }
    }
    return summary;
}

Matrix bilinear_resize(const Matrix& in, std::size_t rows, std::size_t cols) {
    if (in.empty() || rows == 0 || cols == 0) throw std::invalid_argument("bilinear_resize: empty");
    Matrix out(rows, cols);
    const double rscale = rows > 1 ? static_cast<double>(in.rows() - 1) / static_cast<double>(rows - 1) : 0.0;
    const double cscale = cols > 1 ? static_cast<double>(in.cols() - 1) / static_cast<double>(cols - 1) : 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const double fr = static_cast<double>(r) * rscale;
        const std::size_t r0 = static_cast<std::size_t>(fr);
        const std::size_t r1 = std::min(r0 + 1, in.rows() - 1);
        const double wr = fr - static_cast<double>(r0);
        for (std::size_t c = 0; c < cols; ++c) {
            const double fc = static_cast<double>(c) * cscale;
            const std::size_t c0 = static_cast<std::size_t>(fc);
            const std::size_t c1 = std::min(c0 + 1, in.cols() - 1);
            const double wc = fc - static_cast<double>(c0);
            out.at(r, c) = (1 - wr) * ((1 - wc) * in.at(r0, c0) + wc * in.at(r0, c1)) +
                           wr * ((1 - wc) * in.at(r1, c0) + wc * in.at(r1, c1));
        }
    }
    return out;
}

std::vector<Matrix> cam(HarModel& model, const Example& example, int target_class) {
    if (target_class < 0 || static_cast<std::size_t>(target_class) >= model.dims().classes) {
        throw std::invalid_argument("cam: target class out of range");
    }
    const std::size_t idx = 0;
    model::Batch batch = model::make_batch(std::span(&example, 1), std::span(&idx, 1));

    nn::Tape tape;
    auto trace = model.forward(tape, batch, nn::Mode::Infer);
    if (trace.logits == nn::Tape::kInvalid || trace.sensor_maps.empty()) {
        throw std::invalid_argument("cam: model variant does not expose per-sensor feature maps");
    }
    auto score = tape.select(trace.logits, 0, static_cast<std::size_t>(target_class));
    tape.backward(score);

    const std::size_t c_img = model.dims().channels;
    const std::size_t k_img = model.dims().width;

    std::vector<Matrix> maps;
    maps.reserve(trace.sensor_maps.size());
    for (model::ValueId map_id : trace.sensor_maps) {
        const nn::Tensor& act = tape.value(map_id); // [1, CH, H, W]
        const nn::Tensor& grad = tape.grad(map_id);
        const std::size_t ch = act.dim(1), h = act.dim(2), w = act.dim(3);

        // Channel weights: spatial mean of the gradient.
        std::vector<double> weights(ch, 0.0);
        for (std::size_t ci = 0; ci < ch; ++ci) {
            const double* g = grad.data() + ci * h * w;
            double sum = 0.0;
            for (std::size_t e = 0; e < h * w; ++e) sum += g[e];
            weights[ci] = sum / static_cast<double>(h * w);
        }

        Matrix raw(h, w);
        for (std::size_t ci = 0; ci < ch; ++ci) {
            const double* a = act.data() + ci * h * w;
            for (std::size_t e = 0; e < h * w; ++e) raw.values()[e] += weights[ci] * a[e];
        }
        for (double& v : raw.values()) v = std::max(v, 0.0);

        Matrix resized = (h == c_img && w == k_img) ? raw : bilinear_resize(raw, c_img, k_img);
        double mn = resized.values()[0], mx = resized.values()[0];
        for (double v : resized.values()) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        if (mx > mn) {
            for (double& v : resized.values()) v = (v - mn) / (mx - mn);
        } else {
            for (double& v : resized.values()) v = 0.0;
        }
        maps.push_back(std::move(resized));
    }
    return maps;
}

void render_heatmap(const Matrix& m, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / (stem + ".csv"));
    if (!csv) throw std::runtime_error("render_heatmap: cannot write in " + dir.string());
    csv.precision(17);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) csv << ",";
            csv << m.at(r, c);
        }
        csv << "\n";
    }
    csv.close();

    // Render from the emitted values, not the in-memory matrix.
    Matrix reread = read_matrix_csv(dir / (stem + ".csv"));
    png::write_heatmap(dir / (stem + ".png"), reread);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_matrix_csv: cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) row.push_back(std::stod(field));
        if (!rows.empty() && row.size() != rows[0].size()) {
            throw std::runtime_error("read_matrix_csv: ragged rows in " + path.string());
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("read_matrix_csv: empty file " + path.string());
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c) m.at(r, c) = rows[r][c];
    return m;
}

} // namespace har::viz
