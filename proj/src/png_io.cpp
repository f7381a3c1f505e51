#include "har/png_io.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace har::png {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> table{};
    for (std::uint32_t n = 0; n < 256; ++n) {
        std::uint32_t c = n;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        table[n] = c;
    }
    return table;
}

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
    std::uint32_t a = 1, b = 0;
    for (std::size_t i = 0; i < len; ++i) {
        a = (a + data[i]) % 65521u;
        b = (b + a) % 65521u;
    }
    return (b << 16) | a;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4], const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), data.begin(), data.end());
    out.insert(out.end(), body.begin(), body.end());
    put_be32(out, crc32(body.data(), body.size()));
}

// Raw scanlines -> zlib stream made of stored (uncompressed) deflate blocks.
std::vector<std::uint8_t> zlib_stored(const std::vector<std::uint8_t>& raw) {
    std::vector<std::uint8_t> z;
    z.push_back(0x78);
    z.push_back(0x01);
    std::size_t off = 0;
    do {
        const std::size_t block = std::min<std::size_t>(65535, raw.size() - off);
        const bool final = off + block == raw.size();
        z.push_back(final ? 1 : 0);
        z.push_back(static_cast<std::uint8_t>(block & 0xFF));
        z.push_back(static_cast<std::uint8_t>(block >> 8));
        z.push_back(static_cast<std::uint8_t>(~block & 0xFF));
        z.push_back(static_cast<std::uint8_t>((~block >> 8) & 0xFF));
        z.insert(z.end(), raw.begin() + off, raw.begin() + off + block);
        off += block;
    } while (off < raw.size());
    put_be32(z, adler32(raw.data(), raw.size()));
    return z;
}

void write_png(const std::filesystem::path& path, std::size_t width, std::size_t height,
               const std::vector<std::uint8_t>& pixels, std::uint8_t color_type, std::size_t bpp) {
    if (width == 0 || height == 0) throw std::invalid_argument("png: empty image");
    if (pixels.size() != width * height * bpp) throw std::invalid_argument("png: pixel buffer size mismatch");

    std::vector<std::uint8_t> raw;
    raw.reserve(height * (1 + width * bpp));
    for (std::size_t y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        raw.insert(raw.end(), pixels.begin() + y * width * bpp, pixels.begin() + (y + 1) * width * bpp);
    }

    std::vector<std::uint8_t> out = {137, 80, 78, 71, 13, 10, 26, 10};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8);          // bit depth
    ihdr.push_back(color_type); // 0 gray, 2 rgb
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zlib_stored(raw));
    append_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("png: cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("png: write failed for " + path.string());
}

} // namespace

void write_rgb8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                const std::vector<std::uint8_t>& pixels) {
    write_png(path, width, height, pixels, 2, 3);
}

void write_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                 const std::vector<std::uint8_t>& pixels) {
    write_png(path, width, height, pixels, 0, 1);
}

void write_gray8_scaled(const std::filesystem::path& path, const Matrix& m) {
    double mn = m.at(0, 0), mx = m.at(0, 0);
    for (double v : m.values()) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    std::vector<std::uint8_t> pixels(m.size());
    const double scale = mx > mn ? 255.0 / (mx - mn) : 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
        pixels[i] = static_cast<std::uint8_t>((m.values()[i] - mn) * scale + 0.5);
    }
    write_gray8(path, m.cols(), m.rows(), pixels);
}

void blue_red_color(double t, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
    t = std::clamp(t, 0.0, 1.0);
    auto lerp = [](double a, double b, double u) { return a + (b - a) * u; };
    double rf, gf, bf;
    if (t < 0.5) {
        const double u = t * 2.0; // blue -> white
        rf = lerp(0, 255, u);
        gf = lerp(0, 255, u);
        bf = 255;
    } else {
        const double u = (t - 0.5) * 2.0; // white -> red
        rf = 255;
        gf = lerp(255, 0, u);
        bf = lerp(255, 0, u);
    }
    r = static_cast<std::uint8_t>(rf + 0.5);
    g = static_cast<std::uint8_t>(gf + 0.5);
    b = static_cast<std::uint8_t>(bf + 0.5);
}

void write_heatmap(const std::filesystem::path& path, const Matrix& m, std::size_t cell_px) {
    if (m.empty()) throw std::invalid_argument("heatmap: empty matrix");
    double mn = m.at(0, 0), mx = m.at(0, 0);
    for (double v : m.values()) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double scale = mx > mn ? 1.0 / (mx - mn) : 0.0;

    const std::size_t w = m.cols() * cell_px;
    const std::size_t h = m.rows() * cell_px;
    std::vector<std::uint8_t> pixels(w * h * 3);
    for (std::size_t row = 0; row < m.rows(); ++row)
        for (std::size_t col = 0; col < m.cols(); ++col) {
            std::uint8_t r, g, b;
            blue_red_color((m.at(row, col) - mn) * scale, r, g, b);
            for (std::size_t y = row * cell_px; y < (row + 1) * cell_px; ++y)
                for (std::size_t x = col * cell_px; x < (col + 1) * cell_px; ++x) {
                    std::uint8_t* px = pixels.data() + (y * w + x) * 3;
                    px[0] = r;
                    px[1] = g;
                    px[2] = b;
                }
        }
    write_rgb8(path, w, h, pixels);
}

} // namespace har::png
