#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "har/signal.hpp"
#include "test_util.hpp"

using namespace har;
using signal::ImageKind;
using signal::Segment;
using signal::SegmentImage;
using signal::WindowingConfig;

namespace {

data::Recording make_recording(std::size_t sensors, std::size_t channels, std::size_t frames,
                               std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-5.0, 5.0);
    data::Recording rec;
    rec.sample_rate_hz = 32;
    rec.activity_label = 3;
    rec.subject_id = 2;
    rec.sensors.assign(sensors, Matrix(channels, frames));
    for (Matrix& m : rec.sensors)
        for (double& v : m.values()) v = dist(rng);
    return rec;
}

Segment make_segment(std::size_t sensors, std::size_t channels, std::size_t t, std::uint64_t seed = 1) {
    data::Recording rec = make_recording(sensors, channels, t, seed);
    return signal::slide_windows(rec, {t, t}, {{0, channels}})[0];
}

// Independent window-count oracle: enumerate valid offsets.
std::size_t count_windows(std::size_t total, std::size_t t, std::size_t stride) {
    std::size_t count = 0;
    for (std::size_t off = 0; off + t <= total; off += stride) ++count;
    return count;
}

} // namespace

TEST_SUITE("slide_windows") {
    TEST_CASE("standard setting cuts 12 windows, last at [88,120)") {
        data::Recording rec = make_recording(2, 3, 125);
        auto segs = signal::slide_windows(rec, {32, 8}, {{0, 3}});
        REQUIRE(segs.size() == 12);
        CHECK(segs.back().sensors[0].at(0, 0) == rec.sensors[0].at(0, 88));
        CHECK(segs.back().sensors[0].at(2, 31) == rec.sensors[0].at(2, 119));
        for (const Segment& s : segs) {
            CHECK(s.label == rec.activity_label);
            CHECK(s.subject_id == rec.subject_id);
            CHECK(s.window_len() == 32);
        }
    }

    TEST_CASE("whole-recording window yields exactly one segment") {
        data::Recording rec = make_recording(1, 2, 125);
        auto segs = signal::slide_windows(rec, {125, 125}, {{0, 2}});
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].sensors[0].values() == rec.sensors[0].values());
    }

    TEST_CASE("non-overlapping stride") {
        data::Recording rec = make_recording(1, 1, 125);
        CHECK(signal::slide_windows(rec, {32, 32}, {{0, 1}}).size() == 3);
    }

    TEST_CASE("window longer than the recording is rejected") {
        data::Recording rec = make_recording(1, 1, 20);
        CHECK_THROWS(signal::slide_windows(rec, {32, 8}, {{0, 1}}));
    }

    TEST_CASE("count formula matches enumeration, exhaustively over a small range") {
        for (std::size_t total = 1; total <= 40; ++total)
            for (std::size_t t = 1; t <= total; ++t)
                for (std::size_t stride = 1; stride <= t; ++stride) {
                    CHECK(signal::window_count(total, t, stride) == count_windows(total, t, stride));
                }
        // And the actual op follows the formula.
        data::Recording rec = make_recording(1, 1, 60);
        for (std::size_t t = 1; t <= 60; t += 7)
            for (std::size_t stride = 1; stride <= t; stride += 3) {
                CHECK(signal::slide_windows(rec, {t, stride}, {{0, 1}}).size() == count_windows(60, t, stride));
            }
    }

    TEST_CASE("sensors stay synchronized") {
        data::Recording rec = make_recording(3, 2, 50);
        auto segs = signal::slide_windows(rec, {16, 4}, {{0, 2}});
        for (std::size_t i = 0; i < segs.size(); ++i) {
            for (std::size_t s = 0; s < 3; ++s) {
                CHECK(segs[i].sensors[s].at(1, 5) == rec.sensors[s].at(1, i * 4 + 5));
            }
        }
    }
}

TEST_SUITE("normalize_modality") {
    TEST_CASE("affine min-max example") {
        Segment seg;
        seg.modality_spans = {{0, 1}};
        seg.sensors = {Matrix(1, 3)};
        seg.sensors[0].at(0, 0) = -2.0;
        seg.sensors[0].at(0, 1) = 0.0;
        seg.sensors[0].at(0, 2) = 2.0;
        Segment out = signal::normalize_modality(seg);
        CHECK(out.sensors[0].at(0, 0) == 0.0);
        CHECK(out.sensors[0].at(0, 1) == 0.5);
        CHECK(out.sensors[0].at(0, 2) == 1.0);
    }

    TEST_CASE("constant span maps to one half") {
        Segment seg;
        seg.modality_spans = {{0, 2}};
        seg.sensors = {Matrix(2, 4, 9.81)};
        Segment out = signal::normalize_modality(seg);
        for (double v : out.sensors[0].values()) CHECK(v == 0.5);
    }

    TEST_CASE("per-span extrema reach 0 and 1; normalization is idempotent") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            Segment seg = make_segment(2, 6, 16, 100 + trial);
            seg.modality_spans = {{0, 3}, {3, 6}};
            Segment out = signal::normalize_modality(seg);
            for (const Matrix& m : out.sensors) {
                for (const auto& [lo, hi] : seg.modality_spans) {
                    double mn = 1e300, mx = -1e300;
                    for (std::size_t c = lo; c < hi; ++c)
                        for (std::size_t i = 0; i < 16; ++i) {
                            mn = std::min(mn, m.at(c, i));
                            mx = std::max(mx, m.at(c, i));
                        }
                    CHECK(mn == 0.0);
                    CHECK(mx == doctest::Approx(1.0).epsilon(1e-15));
                }
            }
            Segment twice = signal::normalize_modality(out);
            for (std::size_t s = 0; s < out.sensors.size(); ++s) {
                for (std::size_t i = 0; i < out.sensors[s].size(); ++i) {
                    CHECK(twice.sensors[s].values()[i] ==
                          doctest::Approx(out.sensors[s].values()[i]).epsilon(1e-12));
                }
            }
        }
    }

    TEST_CASE("normalization absorbs per-modality affine rescaling") {
        Segment seg = make_segment(2, 4, 16, 42);
        seg.modality_spans = {{0, 2}, {2, 4}};
        Segment scaled = seg;
        for (Matrix& m : scaled.sensors) {
            for (std::size_t c = 0; c < 2; ++c)
                for (std::size_t i = 0; i < 16; ++i) m.at(c, i) = 3.5 * m.at(c, i) + 1.0;
            for (std::size_t c = 2; c < 4; ++c)
                for (std::size_t i = 0; i < 16; ++i) m.at(c, i) = 0.25 * m.at(c, i) - 7.0;
        }
        Segment a = signal::normalize_modality(seg);
        Segment b = signal::normalize_modality(scaled);
        for (std::size_t s = 0; s < a.sensors.size(); ++s)
            for (std::size_t i = 0; i < a.sensors[s].size(); ++i) {
                CHECK(a.sensors[s].values()[i] == doctest::Approx(b.sensors[s].values()[i]).epsilon(1e-10));
            }
    }
}

TEST_SUITE("dft_image") {
    TEST_CASE("constant row concentrates in the DC bin") {
        Segment seg;
        seg.modality_spans = {{0, 1}};
        seg.sensors = {Matrix(1, 32, 1.0)};
        SegmentImage img = signal::dft_image(seg);
        REQUIRE(img.images[0].cols() == 16);
        CHECK(img.images[0].at(0, 0) == doctest::Approx(std::log(32.0 + 1e-8)).epsilon(1e-12));
        for (std::size_t k = 1; k < 16; ++k) {
            CHECK(img.images[0].at(0, k) == doctest::Approx(std::log(1e-8)).epsilon(1e-6));
        }
    }

    TEST_CASE("four-cycle cosine lands in bin 4 with magnitude 16") {
        Segment seg;
        seg.modality_spans = {{0, 1}};
        seg.sensors = {Matrix(1, 32)};
        for (std::size_t t = 0; t < 32; ++t) {
            seg.sensors[0].at(0, t) = std::cos(2.0 * M_PI * 4.0 * static_cast<double>(t) / 32.0);
        }
        SegmentImage img = signal::dft_image(seg);
        CHECK(img.images[0].at(0, 4) == doctest::Approx(std::log(16.0 + 1e-8)).epsilon(1e-9));
        for (std::size_t k = 0; k < 16; ++k) {
            if (k == 4) continue;
            CHECK(img.images[0].at(0, k) < std::log(1e-8) + 1e-3); // everything else is ~zero
        }
    }

    TEST_CASE("real input spectra are conjugate-symmetric before truncation") {
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        std::vector<double> row(32);
        for (double& v : row) v = dist(rng);
        auto spectrum = signal::dft(row);
        for (std::size_t k = 1; k < 16; ++k) {
            CHECK(std::abs(spectrum[k]) == doctest::Approx(std::abs(spectrum[32 - k])).epsilon(1e-12));
        }
    }

    TEST_CASE("matches the direct-summation oracle on random rows") {
        std::mt19937_64 rng(12);
        std::uniform_real_distribution<double> dist(0.0, 1.0);
        for (std::size_t len : {32u, 64u, 96u, 50u, 13u}) { // composite and prime lengths
            std::vector<double> row(len);
            for (double& v : row) v = dist(rng);
            auto fast = signal::dft(row);
            auto slow = test::naive_dft(row);
            for (std::size_t k = 0; k < len; ++k) {
                const double err = std::abs(std::abs(fast[k]) - std::abs(slow[k])) /
                                   std::max(std::abs(slow[k]), 1e-12);
                CHECK(err <= 1e-10);
            }
        }
    }

    TEST_CASE("odd window length is rejected") {
        Segment seg;
        seg.modality_spans = {{0, 1}};
        seg.sensors = {Matrix(1, 31, 1.0)};
        CHECK_THROWS(signal::dft_image(seg));
    }
}

TEST_SUITE("dct and raw images") {
    TEST_CASE("constant row has only the zeroth coefficient") {
        Segment seg;
        seg.modality_spans = {{0, 1}};
        seg.sensors = {Matrix(1, 4, 1.0)};
        SegmentImage img = signal::dct_image(seg);
        CHECK(img.images[0].at(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
        for (std::size_t k = 1; k < 4; ++k) {
            CHECK(img.images[0].at(0, k) == doctest::Approx(0.0).epsilon(1e-12));
        }
    }

    TEST_CASE("dct matches direct summation on random rows") {
        Segment seg = make_segment(1, 2, 16, 77);
        SegmentImage img = signal::dct_image(seg);
        for (std::size_t c = 0; c < 2; ++c)
            for (std::size_t k = 0; k < 16; ++k) {
                double acc = 0.0;
                for (std::size_t i = 0; i < 16; ++i) {
                    acc += seg.sensors[0].at(c, i) * std::cos(M_PI * (i + 0.5) * k / 16.0);
                }
                CHECK(img.images[0].at(c, k) == doctest::Approx(acc).epsilon(1e-12));
            }
    }

    TEST_CASE("raw is the identity and sizes follow the kind") {
        Segment seg = make_segment(2, 3, 32, 5);
        SegmentImage raw = signal::raw_image(seg);
        CHECK(raw.images[0].values() == seg.sensors[0].values());
        CHECK(raw.images[0].cols() == 32);
        CHECK(signal::dct_image(seg).images[0].cols() == 32);
        CHECK(signal::dft_image(seg).images[0].cols() == 16);
        CHECK(signal::image_width(ImageKind::Dft, 32) == 16);
        CHECK(signal::image_width(ImageKind::Dct, 32) == 32);
        CHECK(signal::image_width(ImageKind::Raw, 32) == 32);
    }

    TEST_CASE("image dump writes one csv and one png per sensor") {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "har_img_dump";
        fs::remove_all(dir);
        Segment seg = make_segment(2, 3, 32, 6);
        signal::dump_segment_image(signal::dft_image(seg), dir, "seg0");
        for (int s = 0; s < 2; ++s) {
            CHECK(fs::exists(dir / ("seg0_sensor" + std::to_string(s) + ".csv")));
            CHECK(fs::exists(dir / ("seg0_sensor" + std::to_string(s) + ".png")));
        }
        fs::remove_all(dir);
    }
}
