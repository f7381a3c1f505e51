#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "har/matrix.hpp"

namespace har::data {

// One subject's continuous multi-sensor time series with its activity
// label. Every sensor matrix is channels x frames and all sensors share
// the frame count.
struct Recording {
    int subject_id = 0;
    int activity_label = 0;
    std::vector<Matrix> sensors; // S matrices, each C x T_total
    int sample_rate_hz = 0;

    std::size_t num_sensors() const { return sensors.size(); }
    std::size_t num_channels() const { return sensors.empty() ? 0 : sensors[0].rows(); }
    std::size_t total_frames() const { return sensors.empty() ? 0 : sensors[0].cols(); }
};

using ModalitySpan = std::pair<std::size_t, std::size_t>; // [start_channel, end_channel)

struct DatasetMeta {
    std::size_t num_sensors = 0;
    std::size_t num_channels = 0;
    std::size_t num_classes = 0;
    std::size_t num_subjects = 0;
    int sample_rate_hz = 0;
    std::vector<std::string> class_names;
    std::vector<std::string> sensor_names;
    // Channel spans of the physical modalities (e.g. accelerometer,
    // gyroscope, magnetometer); they partition [0, num_channels).
    std::vector<ModalitySpan> modality_spans;
};

struct Dataset {
    DatasetMeta meta;
    std::vector<Recording> recordings;
};

// Validates that every recording matches the meta (shape, label range,
// subject range); throws with the offending recording index otherwise.
void validate_dataset(const Dataset& ds);

// Loader for the five-IMU daily/sports activity corpus: root contains
// a01..a19 (activities), each with p1..p8 (subjects), each with
// s01..s60.txt of 125 rows x 45 comma-separated columns. Columns are
// grouped per body location (torso, right arm, left arm, right leg, left
// leg), 9 channels each in acc x,y,z / gyro x,y,z / mag x,y,z order.
// Missing or extra filesystem entries raise an error naming the path.
Dataset load_daily_dataset(const std::filesystem::path& root_dir);

// Generic manifest loader. The manifest is UTF-8 text: a header line
//   S=<int>,C=<int>,rate=<int>,M=<int>
// followed by one `file,subject,label` line per recording. Each CSV file
// has S*C columns (sensor-major) and one frame per row.
Dataset load_csv_dataset(const std::filesystem::path& manifest);

// Writes a dataset in the generic manifest schema. Values are emitted at
// full round-trip precision so reloading reproduces them exactly.
void write_csv_dataset(const std::filesystem::path& dir, const Dataset& ds,
                       const std::string& manifest_name = "manifest.txt");

// A single sinusoid planted at one (sensor, channel) slot.
struct ClassSinusoid {
    std::size_t sensor = 0;
    std::size_t channel = 0;
    double frequency_hz = 0.0;
    double amplitude = 1.0;
};

// Controlled synthetic dataset: every recording of class m carries the
// class's sinusoids at their slots; all other entries are Gaussian noise
// of std noise_std. relevant_sensor, when set, constrains each class's
// signal to a single sensor and records which (attention ground truth).
//
// When relevant_sensor is set, sensors other than the class's relevant one
// can additionally carry one class-independent distractor sinusoid per
// recording, drawn per recording from that sensor's pool. Distractors make
// sensor selection informative without adding class signal anywhere else.
struct SynthSpec {
    std::size_t num_sensors = 1;
    std::size_t num_channels = 1;
    std::size_t num_classes = 2;
    std::size_t num_subjects = 1;
    std::size_t recordings_per_class = 1;
    std::size_t total_frames = 128;
    int sample_rate_hz = 32;
    double noise_std = 0.0;
    std::map<int, std::vector<ClassSinusoid>> signatures;        // class -> sinusoids
    std::map<int, std::size_t> relevant_sensor;                  // optional class -> sensor
    std::map<std::size_t, std::vector<double>> distractor_pool;  // sensor -> candidate frequencies
    double distractor_amplitude = 0.0;

    void validate() const;
};

// Pure function of (spec, seed): same arguments give bitwise-identical
// datasets.
Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

} // namespace har::data
