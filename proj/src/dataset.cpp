#include "har/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace har::data {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDailyActivities = 19;
constexpr std::size_t kDailySubjects = 8;
constexpr std::size_t kDailyFilesPerSubject = 60;
constexpr std::size_t kDailySensors = 5;
constexpr std::size_t kDailyChannels = 9;
constexpr std::size_t kDailyFrames = 125;
constexpr int kDailyRateHz = 25;

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::string two_digits(std::size_t v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02zu", v);
    return buf;
}

// Parses one comma-separated line of doubles into `out`; returns the field
// count actually present.
std::size_t parse_csv_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
        while (p < end && (*p == ' ' || *p == '\t')) ++p;
        char* next = nullptr;
        const double v = std::strtod(p, &next);
        if (next == p) fail("malformed numeric field in line: " + line.substr(0, 64));
        out.push_back(v);
        p = next;
        while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
        if (p < end) {
            if (*p != ',') fail("expected ',' in line: " + line.substr(0, 64));
            ++p;
        }
    }
    return out.size();
}

std::string full_precision(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void strip_cr(std::string& s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == '\n')) s.pop_back();
}

} // namespace

void validate_dataset(const Dataset& ds) {
    const DatasetMeta& m = ds.meta;
    if (!m.modality_spans.empty()) {
        std::size_t expect = 0;
        for (const auto& [lo, hi] : m.modality_spans) {
            if (lo != expect || hi <= lo) fail("dataset meta: modality spans do not partition channels");
            expect = hi;
        }
        if (expect != m.num_channels) fail("dataset meta: modality spans do not cover all channels");
    }
    for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
        const Recording& r = ds.recordings[i];
        if (r.num_sensors() != m.num_sensors) {
            fail("recording " + std::to_string(i) + ": sensor count " + std::to_string(r.num_sensors()) +
                 " != " + std::to_string(m.num_sensors));
        }
        const std::size_t frames = r.total_frames();
        if (frames == 0) fail("recording " + std::to_string(i) + ": empty");
        for (const Matrix& s : r.sensors) {
            if (s.rows() != m.num_channels || s.cols() != frames) {
                fail("recording " + std::to_string(i) + ": sensor matrix shape mismatch");
            }
        }
        if (r.activity_label < 0 || static_cast<std::size_t>(r.activity_label) >= m.num_classes) {
            fail("recording " + std::to_string(i) + ": label " + std::to_string(r.activity_label) +
                 " outside [0," + std::to_string(m.num_classes) + ")");
        }
        if (r.subject_id < 0 || static_cast<std::size_t>(r.subject_id) >= m.num_subjects) {
            fail("recording " + std::to_string(i) + ": subject " + std::to_string(r.subject_id) +
                 " outside [0," + std::to_string(m.num_subjects) + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// Daily loader

Dataset load_daily_dataset(const fs::path& root_dir) {
    if (!fs::is_directory(root_dir)) fail("daily loader: " + root_dir.string() + " is not a directory");

    Dataset ds;
    ds.meta.num_sensors = kDailySensors;
    ds.meta.num_channels = kDailyChannels;
    ds.meta.num_classes = kDailyActivities;
    ds.meta.num_subjects = kDailySubjects;
    ds.meta.sample_rate_hz = kDailyRateHz;
    ds.meta.sensor_names = {"torso", "right_arm", "left_arm", "right_leg", "left_leg"};
    ds.meta.modality_spans = {{0, 3}, {3, 6}, {6, 9}};
    ds.meta.class_names.resize(kDailyActivities);
    for (std::size_t a = 0; a < kDailyActivities; ++a) ds.meta.class_names[a] = "a" + two_digits(a + 1);

    // The tree must contain exactly the documented entries.
    std::set<std::string> expected_activities;
    for (std::size_t a = 1; a <= kDailyActivities; ++a) expected_activities.insert("a" + two_digits(a));
    for (const auto& entry : fs::directory_iterator(root_dir)) {
        const std::string name = entry.path().filename().string();
        if (!expected_activities.count(name)) fail("daily loader: unexpected entry " + entry.path().string());
    }

    ds.recordings.reserve(kDailyActivities * kDailySubjects * kDailyFilesPerSubject);
    std::vector<double> fields;
    fields.reserve(kDailySensors * kDailyChannels);

    for (std::size_t a = 1; a <= kDailyActivities; ++a) {
        const fs::path adir = root_dir / ("a" + two_digits(a));
        if (!fs::is_directory(adir)) fail("daily loader: missing directory " + adir.string());

        std::set<std::string> expected_subjects;
        for (std::size_t p = 1; p <= kDailySubjects; ++p) expected_subjects.insert("p" + std::to_string(p));
        for (const auto& entry : fs::directory_iterator(adir)) {
            const std::string name = entry.path().filename().string();
            if (!expected_subjects.count(name)) fail("daily loader: unexpected entry " + entry.path().string());
        }

        for (std::size_t p = 1; p <= kDailySubjects; ++p) {
            const fs::path pdir = adir / ("p" + std::to_string(p));
            if (!fs::is_directory(pdir)) fail("daily loader: missing directory " + pdir.string());

            std::set<std::string> expected_files;
            for (std::size_t s = 1; s <= kDailyFilesPerSubject; ++s) expected_files.insert("s" + two_digits(s) + ".txt");
            for (const auto& entry : fs::directory_iterator(pdir)) {
                const std::string name = entry.path().filename().string();
                if (!expected_files.count(name)) fail("daily loader: unexpected entry " + entry.path().string());
            }

            for (std::size_t s = 1; s <= kDailyFilesPerSubject; ++s) {
                const fs::path file = pdir / ("s" + two_digits(s) + ".txt");
                std::ifstream in(file);
                if (!in) fail("daily loader: missing file " + file.string());

                Recording rec;
                rec.subject_id = static_cast<int>(p - 1);
                rec.activity_label = static_cast<int>(a - 1);
                rec.sample_rate_hz = kDailyRateHz;
                rec.sensors.assign(kDailySensors, Matrix(kDailyChannels, kDailyFrames));

                std::string line;
                std::size_t row = 0;
                while (std::getline(in, line)) {
                    strip_cr(line);
                    if (line.empty()) continue;
                    if (row >= kDailyFrames) fail("daily loader: " + file.string() + " has more than 125 rows");
                    if (parse_csv_row(line, fields) != kDailySensors * kDailyChannels) {
                        fail("daily loader: " + file.string() + " row " + std::to_string(row) + " has " +
                             std::to_string(fields.size()) + " columns, expected 45");
                    }
                    for (std::size_t si = 0; si < kDailySensors; ++si)
                        for (std::size_t ci = 0; ci < kDailyChannels; ++ci)
                            rec.sensors[si].at(ci, row) = fields[si * kDailyChannels + ci];
                    ++row;
                }
                if (row != kDailyFrames) {
                    fail("daily loader: " + file.string() + " has " + std::to_string(row) + " rows, expected 125");
                }
                ds.recordings.push_back(std::move(rec));
            }
        }
    }
    validate_dataset(ds);
    return ds;
}

// ---------------------------------------------------------------------------
// Generic CSV schema

Dataset load_csv_dataset(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) fail("csv loader: cannot open manifest " + manifest.string());
    const fs::path base = manifest.parent_path();

    std::string header;
    if (!std::getline(in, header)) fail("csv loader: empty manifest " + manifest.string());
    strip_cr(header);

    std::size_t s = 0, c = 0, m = 0;
    int rate = 0;
    {
        std::istringstream hs(header);
        std::string field;
        int seen = 0;
        while (std::getline(hs, field, ',')) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) fail("csv loader: malformed header field '" + field + "'");
            const std::string key = field.substr(0, eq);
            const long val = std::stol(field.substr(eq + 1));
            if (key == "S") s = static_cast<std::size_t>(val);
            else if (key == "C") c = static_cast<std::size_t>(val);
            else if (key == "rate") rate = static_cast<int>(val);
            else if (key == "M") m = static_cast<std::size_t>(val);
            else fail("csv loader: unknown header key '" + key + "'");
            ++seen;
        }
        if (seen != 4 || s == 0 || c == 0 || m == 0 || rate <= 0) {
            fail("csv loader: header must be S=<int>,C=<int>,rate=<int>,M=<int>");
        }
    }

    Dataset ds;
    ds.meta.num_sensors = s;
    ds.meta.num_channels = c;
    ds.meta.num_classes = m;
    ds.meta.sample_rate_hz = rate;
    ds.meta.modality_spans = {{0, c}};

    std::set<std::string> seen_files;
    int max_subject = -1;
    std::string line;
    std::size_t line_no = 1;
    std::vector<double> fields;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;

        std::istringstream ls(line);
        std::string file, subject_str, label_str;
        if (!std::getline(ls, file, ',') || !std::getline(ls, subject_str, ',') || !std::getline(ls, label_str)) {
            fail("csv loader: manifest line " + std::to_string(line_no) + " is not file,subject,label");
        }
        if (!seen_files.insert(file).second) {
            fail("csv loader: duplicate file entry '" + file + "' at manifest line " + std::to_string(line_no));
        }
        const int subject = std::stoi(subject_str);
        const int label = std::stoi(label_str);
        if (label < 0 || static_cast<std::size_t>(label) >= m) {
            fail("csv loader: label " + std::to_string(label) + " outside [0," + std::to_string(m) +
                 ") at manifest line " + std::to_string(line_no));
        }
        if (subject < 0) fail("csv loader: negative subject at manifest line " + std::to_string(line_no));
        max_subject = std::max(max_subject, subject);

        const fs::path csv = base / file;
        std::ifstream data(csv);
        if (!data) fail("csv loader: cannot open " + csv.string());

        std::vector<std::vector<double>> rows;
        std::string data_line;
        std::size_t row_no = 0;
        while (std::getline(data, data_line)) {
            strip_cr(data_line);
            if (data_line.empty()) continue;
            if (parse_csv_row(data_line, fields) != s * c) {
                fail("csv loader: " + csv.string() + " row " + std::to_string(row_no) + " has " +
                     std::to_string(fields.size()) + " columns, expected " + std::to_string(s * c));
            }
            rows.push_back(fields);
            ++row_no;
        }
        if (rows.empty()) fail("csv loader: " + csv.string() + " has no data rows");

        Recording rec;
        rec.subject_id = subject;
        rec.activity_label = label;
        rec.sample_rate_hz = rate;
        rec.sensors.assign(s, Matrix(c, rows.size()));
        for (std::size_t t = 0; t < rows.size(); ++t)
            for (std::size_t si = 0; si < s; ++si)
                for (std::size_t ci = 0; ci < c; ++ci) rec.sensors[si].at(ci, t) = rows[t][si * c + ci];
        ds.recordings.push_back(std::move(rec));
    }

    ds.meta.num_subjects = static_cast<std::size_t>(max_subject + 1);
    if (ds.recordings.empty()) ds.meta.num_subjects = 0;
    for (std::size_t cls = 0; cls < m; ++cls) ds.meta.class_names.push_back("class" + std::to_string(cls));
    for (std::size_t si = 0; si < s; ++si) ds.meta.sensor_names.push_back("sensor" + std::to_string(si));
    validate_dataset(ds);
    return ds;
}

void write_csv_dataset(const fs::path& dir, const Dataset& ds, const std::string& manifest_name) {
    fs::create_directories(dir);
    std::ofstream manifest(dir / manifest_name);
    if (!manifest) fail("csv writer: cannot open manifest for writing in " + dir.string());
    manifest << "S=" << ds.meta.num_sensors << ",C=" << ds.meta.num_channels << ",rate=" << ds.meta.sample_rate_hz
             << ",M=" << ds.meta.num_classes << "\n";

    for (std::size_t i = 0; i < ds.recordings.size(); ++i) {
        const Recording& rec = ds.recordings[i];
        const std::string name = "rec" + std::to_string(i) + ".csv";
        manifest << name << "," << rec.subject_id << "," << rec.activity_label << "\n";

        std::ofstream out(dir / name);
        if (!out) fail("csv writer: cannot open " + (dir / name).string());
        const std::size_t frames = rec.total_frames();
        for (std::size_t t = 0; t < frames; ++t) {
            bool first = true;
            for (std::size_t si = 0; si < rec.num_sensors(); ++si)
                for (std::size_t ci = 0; ci < rec.num_channels(); ++ci) {
                    if (!first) out << ",";
                    out << full_precision(rec.sensors[si].at(ci, t));
                    first = false;
                }
            out << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic generator

void SynthSpec::validate() const {
    if (num_sensors == 0 || num_channels == 0 || num_classes == 0 || num_subjects == 0 || total_frames == 0) {
        fail("synth spec: all dimensions must be positive");
    }
    if (sample_rate_hz <= 0) fail("synth spec: sample rate must be positive");
    if (noise_std < 0.0) fail("synth spec: noise_std must be >= 0");
    for (const auto& [cls, sins] : signatures) {
        if (cls < 0 || static_cast<std::size_t>(cls) >= num_classes) {
            fail("synth spec: signature class " + std::to_string(cls) + " out of range");
        }
        for (const ClassSinusoid& sin : sins) {
            if (sin.sensor >= num_sensors || sin.channel >= num_channels) {
                fail("synth spec: signature slot out of range for class " + std::to_string(cls));
            }
            if (sin.frequency_hz >= sample_rate_hz / 2.0) {
                fail("synth spec: frequency " + std::to_string(sin.frequency_hz) + " at or above Nyquist");
            }
            if (sin.amplitude <= 0.0) fail("synth spec: amplitude must be positive");
        }
    }
    for (const auto& [cls, sensor] : relevant_sensor) {
        if (cls < 0 || static_cast<std::size_t>(cls) >= num_classes) {
            fail("synth spec: relevant-sensor class out of range");
        }
        if (sensor >= num_sensors) fail("synth spec: relevant sensor index out of range");
        auto it = signatures.find(cls);
        if (it != signatures.end()) {
            for (const ClassSinusoid& sin : it->second) {
                if (sin.sensor != sensor) {
                    fail("synth spec: class " + std::to_string(cls) +
                         " has signal outside its declared relevant sensor");
                }
            }
        }
    }
    if (!distractor_pool.empty()) {
        if (relevant_sensor.empty()) {
            fail("synth spec: distractors need relevant_sensor to mark the sensors that stay clean");
        }
        if (distractor_amplitude <= 0.0) fail("synth spec: distractor amplitude must be positive");
        for (const auto& [sensor, pool] : distractor_pool) {
            if (sensor >= num_sensors) fail("synth spec: distractor sensor index out of range");
            for (double f : pool) {
                if (f >= sample_rate_hz / 2.0) fail("synth spec: distractor frequency at or above Nyquist");
            }
        }
    }
}

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    spec.validate();

    Dataset ds;
    ds.meta.num_sensors = spec.num_sensors;
    ds.meta.num_channels = spec.num_channels;
    ds.meta.num_classes = spec.num_classes;
    ds.meta.num_subjects = spec.num_subjects;
    ds.meta.sample_rate_hz = spec.sample_rate_hz;
    ds.meta.modality_spans = {{0, spec.num_channels}};
    for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
        ds.meta.class_names.push_back("class" + std::to_string(cls));
    }
    for (std::size_t s = 0; s < spec.num_sensors; ++s) {
        ds.meta.sensor_names.push_back("sensor" + std::to_string(s));
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, spec.noise_std > 0.0 ? spec.noise_std : 1.0);

    ds.recordings.reserve(spec.num_classes * spec.recordings_per_class);
    for (std::size_t cls = 0; cls < spec.num_classes; ++cls) {
        const auto sig_it = spec.signatures.find(static_cast<int>(cls));
        for (std::size_t k = 0; k < spec.recordings_per_class; ++k) {
            Recording rec;
            rec.subject_id = static_cast<int>(k % spec.num_subjects);
            rec.activity_label = static_cast<int>(cls);
            rec.sample_rate_hz = spec.sample_rate_hz;
            rec.sensors.assign(spec.num_sensors, Matrix(spec.num_channels, spec.total_frames));

            std::vector<std::vector<bool>> has_signal(spec.num_sensors,
                                                      std::vector<bool>(spec.num_channels, false));
            auto add_sinusoid = [&](std::size_t sensor, std::size_t channel, double freq, double amp) {
                has_signal[sensor][channel] = true;
                double* row = rec.sensors[sensor].row(channel);
                for (std::size_t t = 0; t < spec.total_frames; ++t) {
                    row[t] += amp * std::sin(2.0 * M_PI * freq * static_cast<double>(t) /
                                             static_cast<double>(spec.sample_rate_hz));
                }
            };
            if (sig_it != spec.signatures.end()) {
                for (const ClassSinusoid& sin : sig_it->second) {
                    add_sinusoid(sin.sensor, sin.channel, sin.frequency_hz, sin.amplitude);
                }
            }
            if (!spec.distractor_pool.empty()) {
                const auto rel_it = spec.relevant_sensor.find(static_cast<int>(cls));
                for (std::size_t si = 0; si < spec.num_sensors; ++si) {
                    if (rel_it != spec.relevant_sensor.end() && rel_it->second == si) continue;
                    const auto pool_it = spec.distractor_pool.find(si);
                    if (pool_it == spec.distractor_pool.end() || pool_it->second.empty()) continue;
                    std::uniform_int_distribution<std::size_t> pick(0, pool_it->second.size() - 1);
                    std::uniform_int_distribution<std::size_t> chan(0, spec.num_channels - 1);
                    const double freq = pool_it->second[pick(rng)];
                    add_sinusoid(si, chan(rng), freq, spec.distractor_amplitude);
                }
            }
            if (spec.noise_std > 0.0) {
                for (std::size_t si = 0; si < spec.num_sensors; ++si)
                    for (std::size_t ci = 0; ci < spec.num_channels; ++ci) {
                        if (has_signal[si][ci]) continue;
                        double* row = rec.sensors[si].row(ci);
                        for (std::size_t t = 0; t < spec.total_frames; ++t) row[t] = noise(rng);
                    }
            }
            ds.recordings.push_back(std::move(rec));
        }
    }
    validate_dataset(ds);
    return ds;
}

} // namespace har::data
