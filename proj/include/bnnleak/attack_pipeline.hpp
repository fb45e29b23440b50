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

#include "bnnleak/common.hpp"
#include "bnnleak/pdn_tdc.hpp"

#include <string>
#include <vector>

namespace bnnleak {

struct AveragedTrace {
    Grid values{};
    int n_runs = 0;
};

/// Pointwise mean of all traces.
AveragedTrace average_traces(const std::vector<TdcTrace> &traces);
/// Pointwise mean of the first `n` traces.
AveragedTrace average_prefix(const std::vector<TdcTrace> &traces, size_t n);

struct FilteredTrace {
    Grid values{}; ///< absolute filter output, >= 0
    int window = 0;
};

enum class FilterKind { running_mean, butterworth };

struct FilterParams {
    FilterKind kind = FilterKind::running_mean;
    int window = 10;
    double cutoff = 0.05; ///< butterworth corner, cycles^-1
};

/// f[t] = |x[t] - mean(x[t-window .. t-1])| for t >= window, 0 before.
FilteredTrace highpass_filter(const AveragedTrace &avg, int window = 10);
/// First-order Butterworth high-pass (bilinear transform), absolute value.
FilteredTrace butterworth_highpass(const AveragedTrace &avg, double cutoff);
FilteredTrace apply_filter(const AveragedTrace &avg, const FilterParams &p);

struct Histogram {
    std::vector<double> edges; ///< bins + 1 edges over [0, max]
    std::vector<int> counts;
    bool degenerate = false;   ///< all values equal; single bin holds everything
};

Histogram build_histogram(const Grid &values, int bins = 40);

struct ThresholdParams {
    enum class Mode { automatic, otsu, multi_otsu, manual };
    Mode mode = Mode::automatic;
    double manual_value = 0.0;
    /// A bin is near-empty when it holds at most max(1, fraction * tallest bin).
    double near_empty_fraction = 0.1;
    int min_run = 3;
};

struct ThresholdChoice {
    enum class Method { valley, otsu, multi_otsu, manual, degenerate };
    double value = 0.0;
    Method method = Method::manual;
    bool fallback = false; ///< automatic mode found no valley
};

const char *method_name(ThresholdChoice::Method m);

/// Valley search: among maximal runs of non-increasing counts that end in a
/// near-empty bin followed by a rise, take the longest (first on ties) and
/// return the upper edge of its last bin. Runs shorter than min_run do not
/// count; without a valley Otsu's criterion is used and flagged.
ThresholdChoice select_threshold(const Histogram &h, const ThresholdParams &p);
/// Otsu's threshold on the bin centres; returns an interior bin edge.
double otsu_threshold(const Histogram &h);
/// Upper cut of the three-class Otsu split (background, echo, foreground).
double multi_otsu_threshold(const Histogram &h);

/// 255 where f > threshold, 0 elsewhere.
Grid reconstruct_binary(const FilteredTrace &f, double threshold);

struct RofParams {
    double tau = 0.1;
    double tv_weight = 40.0;
    int max_iter = 200;
    double tol = 1e-4; ///< RMS change of the primal iterate
    bool record_energy = false;
};

struct RofResult {
    Grid u{};
    int iterations = 0;
    bool converged = false;
    std::vector<double> energy; ///< per iterate (index 0 = input) when recorded
};

/// Minimises TV(u) + ||u - f||^2 / (2 tv_weight) with the projected dual
/// iteration p <- P(p + (tau / tv_weight) grad u), u = f + tv_weight div p,
/// Neumann boundaries. Output is clamped to [0, 255].
RofResult rof_denoise(const Grid &f, const RofParams &p = {});
/// Isotropic TV(u) + ||u - f||^2 / (2 tv_weight).
double rof_energy(const Grid &u, const Grid &f, double tv_weight);

struct AttackParams {
    FilterParams filter;
    ThresholdParams threshold;
    int bins = 40;
    bool denoise = true;
    RofParams rof;
};

struct Provenance {
    int n_runs = 0;
    std::string config_hash;
    std::string image_id;
};

struct RecoveredImage {
    AveragedTrace averaged;
    FilteredTrace filtered;
    Histogram histogram;
    ThresholdChoice threshold;
    Grid binary{};
    Grid denoised{}; ///< equals `binary` when denoising is off
    int rof_iterations = 0;
    bool rof_converged = true;
    Provenance provenance;
};

RecoveredImage run_attack(const std::vector<TdcTrace> &traces, const AttackParams &p);
RecoveredImage run_attack(const AveragedTrace &avg, const AttackParams &p);

std::string trace_csv(const Grid &values, const char *column);
std::string histogram_csv(const Histogram &h);

} // namespace bnnleak
