#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include "har/dataset.hpp"
#include "har/matrix.hpp"

namespace har::signal {

struct WindowingConfig {
    std::size_t window_len = 32; // T
    std::size_t stride = 8;      // delta-t
};

// A T-frame window cut from a recording, one C x T matrix per sensor.
struct Segment {
    std::vector<Matrix> sensors;
    int label = 0;
    int subject_id = 0;
    std::vector<data::ModalitySpan> modality_spans;

    std::size_t num_sensors() const { return sensors.size(); }
    std::size_t num_channels() const { return sensors.empty() ? 0 : sensors[0].rows(); }
    std::size_t window_len() const { return sensors.empty() ? 0 : sensors[0].cols(); }
};

enum class ImageKind { Raw, Dct, Dft };

const char* image_kind_name(ImageKind kind);
ImageKind image_kind_from_name(const std::string& name);

// Fixed-size per-sensor images derived from one segment. Raw and DCT keep
// C x T; DFT keeps the non-redundant half spectrum, C x (T/2).
struct SegmentImage {
    std::vector<Matrix> images;
    ImageKind kind = ImageKind::Dft;

    std::size_t num_sensors() const { return images.size(); }
    std::size_t height() const { return images.empty() ? 0 : images[0].rows(); }
    std::size_t width() const { return images.empty() ? 0 : images[0].cols(); }
};

// Number of image columns a kind produces for window length T.
std::size_t image_width(ImageKind kind, std::size_t window_len);

// floor((T_total - T)/stride) + 1, the number of windows slide_windows
// produces. Requires T <= T_total.
std::size_t window_count(std::size_t total_frames, std::size_t window_len, std::size_t stride);

// Cuts floor((T_total - T)/stride) + 1 windows at offsets 0, stride, ...
// All sensors are windowed at identical offsets. Throws if T > T_total.
std::vector<Segment> slide_windows(const data::Recording& rec, const WindowingConfig& cfg,
                                   const std::vector<data::ModalitySpan>& modality_spans);

// Min-max scales every (sensor, modality span) block of the segment to
// [0,1] using that block's own extrema; a constant block maps to 0.5.
Segment normalize_modality(const Segment& seg);

// Log-magnitude half-spectrum image: per channel row, the length-T DFT
// along time, bins 0 .. T/2-1 kept, stored as log(|X[k]| + 1e-8).
// Requires even T.
SegmentImage dft_image(const Segment& seg);

// Unnormalized DCT-II along time, all T coefficients kept.
SegmentImage dct_image(const Segment& seg);

// Identity on values.
SegmentImage raw_image(const Segment& seg);

SegmentImage make_image(const Segment& seg, ImageKind kind);

// Cooley-Tukey DFT of a real row (any composite length; prime lengths fall
// back to direct summation).
std::vector<std::complex<double>> dft(const std::vector<double>& row);

// Dumps one CSV (exact values) and one grayscale PNG preview per sensor.
void dump_segment_image(const SegmentImage& image, const std::filesystem::path& dir,
                        const std::string& stem);

} // namespace har::signal
