#include "har/signal.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "har/png_io.hpp"

namespace har::signal {

namespace {

constexpr double kLogEps = 1e-8;

std::size_t smallest_factor(std::size_t n) {
    for (std::size_t p = 2; p * p <= n; ++p) {
        if (n % p == 0) return p;
    }
    return n;
}

void dft_recursive(const std::vector<std::complex<double>>& x, std::vector<std::complex<double>>& out) {
    const std::size_t n = x.size();
    if (n == 1) {
        out = x;
        return;
    }
    const std::size_t p = smallest_factor(n);
    if (p == n) {
        // Prime length: direct summation.
        out.assign(n, {0.0, 0.0});
        for (std::size_t k = 0; k < n; ++k) {
            std::complex<double> acc{0.0, 0.0};
            for (std::size_t t = 0; t < n; ++t) {
                const double ang = -2.0 * M_PI * static_cast<double>(k * t % n) / static_cast<double>(n);
                acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        return;
    }

    // Decimate in time by p: X[k] = sum_r twiddle(r*k) * Xr[k mod m].
    const std::size_t m = n / p;
    std::vector<std::vector<std::complex<double>>> sub(p);
    std::vector<std::complex<double>> part(m), part_out;
    for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t j = 0; j < m; ++j) part[j] = x[j * p + r];
        dft_recursive(part, part_out);
        sub[r] = part_out;
    }
    out.assign(n, {0.0, 0.0});
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t r = 0; r < p; ++r) {
            const double ang = -2.0 * M_PI * static_cast<double>((r * k) % n) / static_cast<double>(n);
            acc += std::complex<double>(std::cos(ang), std::sin(ang)) * sub[r][k % m];
        }
        out[k] = acc;
    }
}

} // namespace

const char* image_kind_name(ImageKind kind) {
    switch (kind) {
        case ImageKind::Raw: return "raw";
        case ImageKind::Dct: return "dct";
        case ImageKind::Dft: return "dft";
    }
    return "?";
}

ImageKind image_kind_from_name(const std::string& name) {
    if (name == "raw") return ImageKind::Raw;
    if (name == "dct") return ImageKind::Dct;
    if (name == "dft") return ImageKind::Dft;
    throw std::invalid_argument("unknown image kind '" + name + "' (expected raw|dct|dft)");
}

std::size_t image_width(ImageKind kind, std::size_t window_len) {
    return kind == ImageKind::Dft ? window_len / 2 : window_len;
}

std::size_t window_count(std::size_t total_frames, std::size_t window_len, std::size_t stride) {
    return (total_frames - window_len) / stride + 1;
}

std::vector<Segment> slide_windows(const data::Recording& rec, const WindowingConfig& cfg,
                                   const std::vector<data::ModalitySpan>& modality_spans) {
    const std::size_t total = rec.total_frames();
    const std::size_t t = cfg.window_len;
    const std::size_t stride = cfg.stride;
    if (t == 0 || stride == 0) throw std::invalid_argument("slide_windows: window and stride must be positive");
    if (stride > t) throw std::invalid_argument("slide_windows: stride must not exceed the window length");
    if (t > total) {
        throw std::invalid_argument("slide_windows: window length " + std::to_string(t) +
                                    " exceeds recording length " + std::to_string(total));
    }

    const std::size_t count = window_count(total, t, stride);
    std::vector<Segment> segments;
    segments.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t off = i * stride;
        Segment seg;
        seg.label = rec.activity_label;
        seg.subject_id = rec.subject_id;
        seg.modality_spans = modality_spans;
        seg.sensors.reserve(rec.num_sensors());
        for (const Matrix& sensor : rec.sensors) {
            Matrix window(sensor.rows(), t);
            for (std::size_t r = 0; r < sensor.rows(); ++r) {
                const double* src = sensor.row(r) + off;
                std::copy(src, src + t, window.row(r));
            }
            seg.sensors.push_back(std::move(window));
        }
        segments.push_back(std::move(seg));
    }
    return segments;
}

Segment normalize_modality(const Segment& seg) {
    Segment out = seg;
    const std::size_t t = seg.window_len();
    for (Matrix& sensor : out.sensors) {
        for (const auto& [lo, hi] : seg.modality_spans) {
            double mn = sensor.at(lo, 0), mx = sensor.at(lo, 0);
            for (std::size_t c = lo; c < hi; ++c)
                for (std::size_t i = 0; i < t; ++i) {
                    mn = std::min(mn, sensor.at(c, i));
                    mx = std::max(mx, sensor.at(c, i));
                }
            if (mx > mn) {
                const double inv = 1.0 / (mx - mn);
                for (std::size_t c = lo; c < hi; ++c)
                    for (std::size_t i = 0; i < t; ++i) sensor.at(c, i) = (sensor.at(c, i) - mn) * inv;
            } else {
                for (std::size_t c = lo; c < hi; ++c)
                    for (std::size_t i = 0; i < t; ++i) sensor.at(c, i) = 0.5;
            }
        }
    }
    return out;
}

std::vector<std::complex<double>> dft(const std::vector<double>& row) {
    std::vector<std::complex<double>> x(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) x[i] = {row[i], 0.0};
    std::vector<std::complex<double>> out;
    dft_recursive(x, out);
    return out;
}

SegmentImage dft_image(const Segment& seg) {
    const std::size_t t = seg.window_len();
    if (t % 2 != 0) throw std::invalid_argument("dft_image: window length must be even");
    const std::size_t k = t / 2;

    SegmentImage img;
    img.kind = ImageKind::Dft;
    img.images.reserve(seg.num_sensors());
    std::vector<double> row(t);
    for (const Matrix& sensor : seg.sensors) {
        Matrix out(sensor.rows(), k);
        for (std::size_t c = 0; c < sensor.rows(); ++c) {
            std::copy(sensor.row(c), sensor.row(c) + t, row.begin());
            const auto spectrum = dft(row);
            for (std::size_t f = 0; f < k; ++f) out.at(c, f) = std::log(std::abs(spectrum[f]) + kLogEps);
        }
        img.images.push_back(std::move(out));
    }
    return img;
}

SegmentImage dct_image(const Segment& seg) {
    const std::size_t t = seg.window_len();
    SegmentImage img;
    img.kind = ImageKind::Dct;
    img.images.reserve(seg.num_sensors());
    for (const Matrix& sensor : seg.sensors) {
        Matrix out(sensor.rows(), t);
        for (std::size_t c = 0; c < sensor.rows(); ++c) {
            const double* src = sensor.row(c);
            for (std::size_t k = 0; k < t; ++k) {
                double acc = 0.0;
                for (std::size_t i = 0; i < t; ++i) {
                    acc += src[i] * std::cos(M_PI * (static_cast<double>(i) + 0.5) * static_cast<double>(k) /
                                             static_cast<double>(t));
                }
                out.at(c, k) = acc;
            }
        }
        img.images.push_back(std::move(out));
    }
    return img;
}

SegmentImage raw_image(const Segment& seg) {
    SegmentImage img;
    img.kind = ImageKind::Raw;
    img.images = seg.sensors;
    return img;
}

SegmentImage make_image(const Segment& seg, ImageKind kind) {
    switch (kind) {
        case ImageKind::Raw: return raw_image(seg);
        case ImageKind::Dct: return dct_image(seg);
        case ImageKind::Dft: return dft_image(seg);
    }
    throw std::invalid_argument("make_image: bad kind");
}

void dump_segment_image(const SegmentImage& image, const std::filesystem::path& dir, const std::string& stem) {
    std::filesystem::create_directories(dir);
    for (std::size_t s = 0; s < image.images.size(); ++s) {
        const Matrix& m = image.images[s];
        const std::string base = stem + "_sensor" + std::to_string(s);

        std::ofstream csv(dir / (base + ".csv"));
        if (!csv) throw std::runtime_error("dump_segment_image: cannot write in " + dir.string());
        csv.precision(17);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) {
                if (c) csv << ",";
                csv << m.at(r, c);
            }
            csv << "\n";
        }

        png::write_gray8_scaled(dir / (base + ".png"), m);
    }
}

} // namespace har::signal
