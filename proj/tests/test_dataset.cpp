#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"

using namespace har;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// Builds a complete synthetic tree in the documented layout. Every file
// shares one cheap 125x45 body except a01/p1/s01.txt, which gets
// distinctive values for the read-back check.
void write_daily_tree(const fs::path& root) {
    std::string body;
    for (int row = 0; row < 125; ++row) {
        for (int col = 0; col < 45; ++col) {
            if (col) body += ",";
            body += std::to_string((row + col) % 7);
        }
        body += "\n";
    }
    char a_name[8], s_name[16];
    for (int a = 1; a <= 19; ++a) {
        std::snprintf(a_name, sizeof(a_name), "a%02d", a);
        for (int p = 1; p <= 8; ++p) {
            const fs::path dir = root / a_name / ("p" + std::to_string(p));
            fs::create_directories(dir);
            for (int s = 1; s <= 60; ++s) {
                std::snprintf(s_name, sizeof(s_name), "s%02d.txt", s);
                std::ofstream out(dir / s_name);
                out << body;
            }
        }
    }
    std::ofstream special(root / "a01" / "p1" / "s01.txt");
    for (int row = 0; row < 125; ++row) {
        for (int col = 0; col < 45; ++col) {
            if (col) special << ",";
            special << row * 45 + col << ".5";
        }
        special << "\n";
    }
}

} // namespace

TEST_SUITE("daily loader") {
    TEST_CASE("complete tree, deleted file, and raw read-back") {
        const fs::path root = fresh_dir("har_daily_tree");
        write_daily_tree(root);

        data::Dataset ds = data::load_daily_dataset(root);
        CHECK(ds.meta.num_sensors == 5);
        CHECK(ds.meta.num_channels == 9);
        CHECK(ds.meta.num_classes == 19);
        CHECK(ds.meta.num_subjects == 8);
        CHECK(ds.meta.sample_rate_hz == 25);
        CHECK(ds.recordings.size() == 19 * 8 * 60);
        for (const data::Recording& rec : ds.recordings) {
            CHECK(rec.num_sensors() == 5);
            CHECK(rec.num_channels() == 9);
            CHECK(rec.total_frames() == 125);
        }

        // First recording is a01/p1/s01.txt: sensor 0 channel 0 equals
        // column 0 of the raw file, frame t comes from row t.
        const data::Recording& first = ds.recordings.front();
        CHECK(first.activity_label == 0);
        CHECK(first.subject_id == 0);
        CHECK(first.sensors[0].at(0, 0) == 0.5);
        CHECK(first.sensors[0].at(0, 2) == doctest::Approx(2 * 45 + 0.5));
        CHECK(first.sensors[0].at(1, 0) == 1.5);            // column 1
        CHECK(first.sensors[2].at(3, 1) == 45 + 21 + 0.5);  // sensor 2 -> column 21, row 1

        // One deleted file is reported by path.
        fs::remove(root / "a07" / "p3" / "s42.txt");
        CHECK_THROWS_WITH_AS(data::load_daily_dataset(root), doctest::Contains("s42.txt"),
                             std::runtime_error);
        fs::copy_file(root / "a07" / "p3" / "s41.txt", root / "a07" / "p3" / "s42.txt");

        // An unexpected entry is reported by path.
        std::ofstream(root / "a07" / "p3" / "notes.txt") << "x";
        CHECK_THROWS_WITH_AS(data::load_daily_dataset(root), doctest::Contains("notes.txt"),
                             std::runtime_error);
        fs::remove(root / "a07" / "p3" / "notes.txt");

        // A malformed row is reported with its index.
        {
            std::ofstream out(root / "a02" / "p2" / "s05.txt");
            out << "1,2,3\n";
        }
        CHECK_THROWS_WITH_AS(data::load_daily_dataset(root), doctest::Contains("row 0"),
                             std::runtime_error);
        fs::remove_all(root);
    }
}

TEST_SUITE("csv loader") {
    TEST_CASE("sensor-major column grouping") {
        const fs::path dir = fresh_dir("har_csv_basic");
        std::ofstream(dir / "manifest.txt") << "S=2,C=3,rate=10,M=3\n"
                                            << "one.csv,0,1\n"
                                            << "two.csv,1,2\n";
        std::ofstream(dir / "one.csv") << "1,2,3,4,5,6\n7,8,9,10,11,12\n";
        std::ofstream(dir / "two.csv") << "0,0,0,1,1,1\n";

        data::Dataset ds = data::load_csv_dataset(dir / "manifest.txt");
        REQUIRE(ds.recordings.size() == 2);
        CHECK(ds.meta.num_subjects == 2);
        const data::Recording& one = ds.recordings[0];
        CHECK(one.total_frames() == 2);
        CHECK(one.sensors[1].at(0, 0) == 4.0); // columns 3..5 are sensor 1
        CHECK(one.sensors[1].at(2, 1) == 12.0);
        CHECK(one.sensors[0].at(0, 1) == 7.0);
        fs::remove_all(dir);
    }

    TEST_CASE("column-count mismatch is rejected") {
        const fs::path dir = fresh_dir("har_csv_cols");
        std::ofstream(dir / "manifest.txt") << "S=2,C=3,rate=10,M=2\n"
                                            << "bad.csv,0,0\n";
        std::ofstream(dir / "bad.csv") << "1,2,3,4,5,6,7\n";
        CHECK_THROWS_WITH_AS(data::load_csv_dataset(dir / "manifest.txt"), doctest::Contains("7 columns"),
                             std::runtime_error);
        fs::remove_all(dir);
    }

    TEST_CASE("label outside the class range is rejected") {
        const fs::path dir = fresh_dir("har_csv_label");
        std::ofstream(dir / "manifest.txt") << "S=1,C=1,rate=10,M=2\n"
                                            << "x.csv,0,2\n";
        std::ofstream(dir / "x.csv") << "1\n";
        CHECK_THROWS(data::load_csv_dataset(dir / "manifest.txt"));
        fs::remove_all(dir);
    }

    TEST_CASE("duplicate file entries are rejected") {
        const fs::path dir = fresh_dir("har_csv_dup");
        std::ofstream(dir / "manifest.txt") << "S=1,C=1,rate=10,M=2\n"
                                            << "x.csv,0,0\n"
                                            << "x.csv,0,1\n";
        std::ofstream(dir / "x.csv") << "1\n";
        CHECK_THROWS_WITH_AS(data::load_csv_dataset(dir / "manifest.txt"), doctest::Contains("duplicate"),
                             std::runtime_error);
        fs::remove_all(dir);
    }

    TEST_CASE("empty manifest keeps the meta and no recordings") {
        const fs::path dir = fresh_dir("har_csv_empty");
        std::ofstream(dir / "manifest.txt") << "S=3,C=2,rate=20,M=4\n";
        data::Dataset ds = data::load_csv_dataset(dir / "manifest.txt");
        CHECK(ds.recordings.empty());
        CHECK(ds.meta.num_sensors == 3);
        CHECK(ds.meta.num_classes == 4);
        fs::remove_all(dir);
    }

    TEST_CASE("write + reload round-trips values exactly") {
        const fs::path dir = fresh_dir("har_csv_roundtrip");
        data::SynthSpec spec = test::easy_synth_spec(2, 3, 2, 4, 2, 32, 0.3);
        data::Dataset ds = data::synth_generate(spec, 99);
        data::write_csv_dataset(dir, ds);
        data::Dataset back = data::load_csv_dataset(dir / "manifest.txt");
        REQUIRE(back.recordings.size() == ds.recordings.size());
        for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
            CHECK(back.recordings[i].subject_id == ds.recordings[i].subject_id);
            CHECK(back.recordings[i].activity_label == ds.recordings[i].activity_label);
            for (std::size_t s = 0; s < ds.meta.num_sensors; ++s) {
                CHECK(back.recordings[i].sensors[s] == ds.recordings[i].sensors[s]);
            }
        }
        fs::remove_all(dir);
    }
}

TEST_SUITE("synth generator") {
    TEST_CASE("noiseless construction plants the exact sinusoid") {
        data::SynthSpec spec;
        spec.num_sensors = 2;
        spec.num_channels = 2;
        spec.num_classes = 1;
        spec.num_subjects = 1;
        spec.recordings_per_class = 1;
        spec.total_frames = 128;
        spec.sample_rate_hz = 32;
        spec.noise_std = 0.0;
        spec.signatures[0] = {{0, 0, 4.0, 1.0}};
        data::Dataset ds = data::synth_generate(spec, 1);
        REQUIRE(ds.recordings.size() == 1);
        const data::Recording& rec = ds.recordings[0];
        for (std::size_t t = 0; t < 128; ++t) {
            CHECK(rec.sensors[0].at(0, t) == doctest::Approx(std::sin(2.0 * M_PI * 4.0 * t / 32.0)).epsilon(1e-15));
            CHECK(rec.sensors[0].at(1, t) == 0.0);
            CHECK(rec.sensors[1].at(0, t) == 0.0);
        }
    }

    TEST_CASE("same spec and seed are bitwise identical") {
        data::SynthSpec spec = test::easy_synth_spec(3, 3, 4, 5, 2);
        data::Dataset a = data::synth_generate(spec, 1234);
        data::Dataset b = data::synth_generate(spec, 1234);
        REQUIRE(a.recordings.size() == b.recordings.size());
        for (std::size_t i = 0; i < a.recordings.size(); ++i) {
            for (std::size_t s = 0; s < 3; ++s) {
                CHECK(a.recordings[i].sensors[s] == b.recordings[i].sensors[s]);
            }
        }
        data::Dataset c = data::synth_generate(spec, 1235);
        CHECK(c.recordings[0].sensors[0].values() != a.recordings[0].sensors[0].values());
    }

    TEST_CASE("noise channel sample mean stays near zero") {
        data::SynthSpec spec;
        spec.num_sensors = 1;
        spec.num_channels = 2;
        spec.num_classes = 1;
        spec.num_subjects = 1;
        spec.recordings_per_class = 1000;
        spec.total_frames = 32;
        spec.sample_rate_hz = 32;
        spec.noise_std = 0.1;
        spec.signatures[0] = {{0, 0, 4.0, 1.0}}; // channel 1 stays pure noise
        data::Dataset ds = data::synth_generate(spec, 7);
        double sum = 0.0;
        std::size_t count = 0;
        for (const data::Recording& rec : ds.recordings) {
            for (std::size_t t = 0; t < 32; ++t) {
                sum += rec.sensors[0].at(1, t);
                ++count;
            }
        }
        CHECK(std::abs(sum / static_cast<double>(count)) < 0.02);
    }

    TEST_CASE("spec validation catches bad inputs") {
        data::SynthSpec spec = test::easy_synth_spec(2, 2, 2, 1, 1);
        spec.signatures[0].push_back({0, 0, 20.0, 1.0}); // >= Nyquist for 32 Hz
        CHECK_THROWS(data::synth_generate(spec, 1));

        data::SynthSpec bad_slot = test::easy_synth_spec(2, 2, 2, 1, 1);
        bad_slot.signatures[1].push_back({5, 0, 2.0, 1.0});
        CHECK_THROWS(data::synth_generate(bad_slot, 1));

        data::SynthSpec mismatch = test::planted_synth_spec(3, 2, 3, 1, 1);
        mismatch.signatures[0].push_back({2, 0, 2.0, 1.0}); // outside the declared sensor
        CHECK_THROWS(data::synth_generate(mismatch, 1));
    }

    TEST_CASE("every recording conforms to the meta") {
        data::Dataset ds = data::synth_generate(test::planted_synth_spec(3, 2, 4, 6, 3), 11);
        CHECK(ds.recordings.size() == 24);
        CHECK_NOTHROW(data::validate_dataset(ds));
        for (const data::Recording& rec : ds.recordings) {
            CHECK(rec.num_sensors() == ds.meta.num_sensors);
            CHECK(rec.num_channels() == ds.meta.num_channels);
        }
    }

    TEST_CASE("distractors land on non-relevant sensors only, deterministically") {
        data::SynthSpec spec = test::planted_synth_spec(3, 2, 3, 4, 1, 64, 0.0);
        spec.distractor_amplitude = 0.5;
        spec.distractor_pool[0] = {7.0};
        spec.distractor_pool[1] = {9.0};
        spec.distractor_pool[2] = {11.0};

        data::Dataset a = data::synth_generate(spec, 31);
        data::Dataset b = data::synth_generate(spec, 31);
        for (std::size_t i = 0; i < a.recordings.size(); ++i) {
            for (std::size_t s = 0; s < 3; ++s) CHECK(a.recordings[i].sensors[s] == b.recordings[i].sensors[s]);
        }

        for (const data::Recording& rec : a.recordings) {
            const std::size_t relevant = spec.relevant_sensor.at(rec.activity_label);
            // Relevant sensor: exactly the planted tone on channel 0.
            for (std::size_t t = 0; t < 64; ++t) {
                CHECK(rec.sensors[relevant].at(0, t) ==
                      doctest::Approx(std::sin(2.0 * M_PI * 5.0 * t / 32.0)).epsilon(1e-12));
                CHECK(rec.sensors[relevant].at(1, t) == 0.0);
            }
            // Every other sensor carries a distractor tone on some channel.
            for (std::size_t s = 0; s < 3; ++s) {
                if (s == relevant) continue;
                double energy = 0.0;
                for (std::size_t c = 0; c < 2; ++c)
                    for (std::size_t t = 0; t < 64; ++t) energy += rec.sensors[s].at(c, t) * rec.sensors[s].at(c, t);
                CHECK(energy > 1.0);
            }
        }

        data::SynthSpec bad = spec;
        bad.relevant_sensor.clear();
        CHECK_THROWS(data::synth_generate(bad, 1));
    }
}
