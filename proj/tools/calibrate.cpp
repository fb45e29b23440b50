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

// Sweeps sensor noise and placement attenuation around the shipped presets
// and prints the anchor statistics used to pick the defaults: mean denoised
// ccr_norm per run count (knee near 200 runs), per placement at the largest
// run count, and for the background / flip robustness rows.
//
//   bnnleak-calibrate [--data-dir DIR] [--sigma S ...] [--lane-gamma G]

#include "bnnleak/experiment_harness.hpp"

#include <CLI11.hpp>

#include <cstdio>

using namespace bnnleak;

int main(int argc, char **argv) {
    CLI::App app{"Sweep noise and attenuation around the default presets"};
    std::string data_dir = "data";
    std::vector<double> sigmas{28.0};
    double lane_gamma = ActivityModelConfig{}.lane_gamma;
    double toggle_weight = ActivityModelConfig{}.toggle_weight;
    std::string threshold = "multi-otsu";
    bool robustness = false;
    double near_empty = ThresholdParams{}.near_empty_fraction;
    app.add_option("--data-dir", data_dir);
    app.add_option("--sigma", sigmas);
    app.add_option("--lane-gamma", lane_gamma);
    app.add_option("--toggle-weight", toggle_weight);
    app.add_option("--threshold", threshold);
    app.add_flag("--robustness", robustness);
    app.add_option("--near-empty", near_empty);
    CLI11_PARSE(app, argc, argv);

    for (double sigma : sigmas) {
        ExperimentSpec spec;
        spec.data_dir = data_dir;
        spec.write_artifacts = false;
        spec.sensor.noise_sigma = sigma;
        spec.activity.lane_gamma = lane_gamma;
        spec.activity.toggle_weight = toggle_weight;
        apply_threshold_option(spec.attack.threshold, threshold);
        spec.attack.threshold.near_empty_fraction = near_empty;
        std::printf("sigma=%g gamma=%g toggle=%g threshold=%s\n", sigma, lane_gamma,
                    toggle_weight, threshold.c_str());
        const SweepResult s = sweep_runs(spec);
        for (const auto &p : s.curve)
            std::printf("  runs %5d  raw %.3f  den %.3f  mssim %.3f\n", p.n_runs, p.ccr_norm_raw,
                        p.ccr_norm_denoised, p.mssim_denoised);
        std::printf("  spearman %.3f\n", s.spearman_denoised);
        for (const auto &row : compare_placements(spec)) {
            std::printf("  %-10s raw %.3f den %.3f |", row.label.c_str(), row.mean_raw,
                        row.mean_denoised);
            for (const auto &r : row.rows)
                std::printf(" %.2f", r.ccr_norm_denoised);
            std::printf("\n");
        }
        if (robustness) {
            const RobustnessResult r = robustness_study(spec);
            for (const auto &row : r.background)
                std::printf("  %-14s raw %.3f den %.3f\n", row.label.c_str(), row.mean_raw,
                            row.mean_denoised);
            for (const auto &row : r.flip)
                std::printf("  %-14s raw %.3f den %.3f\n", row.label.c_str(), row.mean_raw,
                            row.mean_denoised);
        }
    }
    return 0;
}
