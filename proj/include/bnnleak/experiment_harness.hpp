/*
 * SPDX-FileCopyrightText: <text>Copyright 2026 The bnnleak authors</text>
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "bnnleak/attack_pipeline.hpp"
#include "bnnleak/bnn_core.hpp"
#include "bnnleak/conv_power.hpp"
#include "bnnleak/dataset_io.hpp"
#include "bnnleak/metrics.hpp"
#include "bnnleak/pdn_tdc.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bnnleak {

/// Sensor fields a config file may pin on top of the board preset.
struct SensorOverrides {
    std::optional<double> noise_sigma, r_pdn, k_per_volt, stage_delay_ps, clock_mhz,
        attenuation, nominal_drop_v, max_initial_delay_ps;
    std::optional<int> misalignment, calibration_target, stages;
    std::optional<Envelope> envelope; ///< whole-envelope replacement
    std::optional<Envelope::Kind> envelope_kind;
    std::optional<double> envelope_amplitude_v, envelope_cycles;
};

/// Attack defaults for experiments: as AttackParams, but thresholding with
/// the three-class Otsu cut.
AttackParams default_attack();

struct ExperimentSpec {
    std::string name = "experiment";
    std::string board = "zcu104";
    std::string placement = "adjacent";
    std::vector<int> run_counts{100, 200, 500, 1000, 3000, 6000};
    PixelPerturbation perturbation;
    bool stressors = false;
    double stressor_gain = 1.0;
    std::string dataset = "mnist"; ///< mnist | fashion-mnist
    std::string data_dir = "data";
    std::vector<size_t> image_ids; ///< empty: first image of every class
    uint64_t seed = 1;

    uint64_t model_seed = 1;
    std::string model_path; ///< optional trained model; overrides model_seed
    int kernel_index = 0;

    ActivityModelConfig activity;
    SensorOverrides sensor;
    AttackParams attack = default_attack();

    std::vector<std::string> placements{"adjacent", "cross-die", "cross-slr"};
    std::vector<int> backgrounds{0, 1, 10, 30, 50};
    std::vector<double> flip_probabilities{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<int> flip_bits{1, 2};

    std::string out_dir = "out";
    bool write_artifacts = true;
    int threads = 0; ///< 0: hardware concurrency

    void validate() const;
};

/// Board preset, placement attenuation, stressor gain, then overrides.
SensorConfig resolve_sensor(const ExperimentSpec &spec, const std::string &placement);

/// INI-style file: [section] headers and key = value lines; unknown keys are
/// rejected. See configs/demo.cfg for every recognised key.
ExperimentSpec load_spec_file(const std::string &path);
ExperimentSpec parse_spec(const std::string &text);

/// "auto", "otsu", "multi-otsu" or a numeric manual threshold.
void apply_threshold_option(ThresholdParams &t, const std::string &value);
/// "running-mean" or "butterworth".
void apply_filter_option(FilterParams &f, const std::string &value);

struct ReportRow {
    std::string image_id;
    int n_runs = 0;
    std::string config_hash;
    double ccr = 0.0; ///< of the denoised reconstruction
    double ccr_norm_raw = 0.0;
    double ccr_norm_denoised = 0.0;
    double mssim_raw = 0.0;
    double mssim_denoised = 0.0;
    bool operator==(const ReportRow &) const = default;
};

std::string report_csv_header();
std::string to_csv(const ReportRow &row);
ReportRow parse_report_row(const std::string &line);

struct SelectedImage {
    size_t index = 0;
    std::string id;
    Image image;
};

std::vector<SelectedImage> select_images(const ExperimentSpec &spec);
BinaryKernel3x3 attack_kernel(const ExperimentSpec &spec);

/// Captures n runs. Deterministic and background perturbations give one
/// power trace for every run; flips re-perturb the image for each run.
std::vector<TdcTrace> capture_image_runs(const Image &image, const BinaryKernel3x3 &kernel,
                                         const ActivityModelConfig &activity,
                                         const PixelPerturbation &perturbation,
                                         const SensorConfig &sensor, int n_runs,
                                         uint64_t seed);

/// Identifies one simulated configuration, independent of image and run count.
std::string cell_config_hash(const ExperimentSpec &spec, const SensorConfig &sensor,
                             const PixelPerturbation &perturbation);
/// Seed for one image; placement and perturbation do not enter, so cells
/// that differ only in those share their noise.
uint64_t image_seed(const ExperimentSpec &spec, const std::string &image_id);

struct ExperimentResult {
    std::vector<ReportRow> rows; ///< image-major, run counts ascending
    std::vector<std::string> artifacts;
    double wall_seconds = 0.0;
};

/// One configuration over all selected images and run counts. Smaller run
/// counts average a prefix of the largest batch.
ExperimentResult run_experiment(const ExperimentSpec &spec);

struct CurvePoint {
    int n_runs = 0;
    double ccr_norm_raw = 0, ccr_norm_denoised = 0, mssim_raw = 0, mssim_denoised = 0;
};

struct SweepResult {
    std::vector<CurvePoint> curve;
    double spearman_denoised = 0.0;
    ExperimentResult detail;
};

SweepResult sweep_runs(const ExperimentSpec &spec);

struct TableRow {
    std::string label;
    std::vector<ReportRow> rows; ///< one per image at the largest run count
    double mean_raw = 0.0, mean_denoised = 0.0;
};

/// One row per spec.placements entry, same seeds throughout.
std::vector<TableRow> compare_placements(const ExperimentSpec &spec);

struct RobustnessResult {
    std::vector<TableRow> background;
    std::vector<TableRow> flip; ///< flip_bits-major, probabilities ascending
};

RobustnessResult robustness_study(const ExperimentSpec &spec);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double> &x, const std::vector<double> &y);

} // namespace bnnleak
