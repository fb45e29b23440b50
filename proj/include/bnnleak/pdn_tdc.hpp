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
#include "bnnleak/conv_power.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bnnleak {

/// Slow supply drift added to every activity-induced drop.
struct Envelope {
    enum class Kind { none, exponential, sinusoidal };
    Kind kind = Kind::none;
    double amplitude_v = 0.0;
    /// Time constant (exponential) or period (sinusoidal), in cycles.
    double cycles = 1.0;

    /// exponential: A * exp(-t / tau); sinusoidal: A * (1 + sin(2 pi t / P)) / 2.
    double at(int t) const;
    std::string canonical() const;
};

struct SensorConfig {
    int stages = 256;
    double stage_delay_ps = 10.0;
    double clock_mhz = 120.0;
    double r_pdn = 1.0e-4;        ///< volts per activity unit
    double attenuation = 1.0;     ///< placement proxy, (0, 1]
    double noise_sigma = 28.0;    ///< Hamming-weight counts
    Envelope envelope;
    double k_per_volt = 2.0;      ///< fractional delay increase per volt
    int calibration_target = 128; ///< expected HW at the nominal drop
    double stressor_gain = 1.0;
    double nominal_drop_v = 0.0;  ///< drop the calibration is done at
    double max_initial_delay_ps = 20000.0;
    int misalignment = 0;         ///< capture starts this many cycles late

    double clock_period_ps() const { return 1.0e6 / clock_mhz; }
    void validate() const;
    std::string canonical() const;
};

/// HW at one TDC cycle, before any noise.
struct TdcTrace {
    std::array<uint16_t, kPixels> hw{};
    uint64_t run_id = 0;
    std::string config_hash;
};

using VoltageTrace = Grid;

/// v[t] = attenuation * stressor_gain * r_pdn * P[t] + envelope(t).
VoltageTrace voltage_drop(const PowerTrace &power, const SensorConfig &cfg);

/// Initial (adjustable) delay in ps placing the nominal drop at the
/// calibration target. Throws unsatisfiable-calibration when the delay
/// would be negative or beyond max_initial_delay_ps.
double calibrate(const SensorConfig &cfg, double nominal_drop_v);

/// clamp(floor((Tclk - init * (1 + k v)) / (d0 * (1 + k v))), 0, stages).
int tdc_hamming_weight(double drop_v, const SensorConfig &cfg, double initial_delay_ps);

/// One run: pre-noise HW plus rounded Gaussian noise, clamped to [0, stages].
TdcTrace sample_tdc(const VoltageTrace &drops, const SensorConfig &cfg,
                    double initial_delay_ps, Rng &rng);

/// Noise-free readout for a drop trace (shared by all runs of one power trace).
std::array<int, kPixels> tdc_pre_noise(const VoltageTrace &drops, const SensorConfig &cfg,
                                       double initial_delay_ps);

/// Shifts the trace so sample t reads cycle t + cfg.misalignment; cycles
/// outside the computation carry zero activity.
PowerTrace apply_misalignment(const PowerTrace &power, int offset);

/// n independent runs over the same power trace; run r draws from
/// Rng::derive(seed, r).
std::vector<TdcTrace> capture_runs(const PowerTrace &power, const SensorConfig &cfg,
                                   int n_runs, uint64_t seed);

/// `cycle,hw` CSV with run-id and config-hash comment lines.
std::string tdc_trace_csv(const TdcTrace &trace);

/// Batch file: "TDCB", u32 run count, then 784 little-endian u16 per run.
std::string encode_tdc_batch(const std::vector<TdcTrace> &runs);
std::vector<TdcTrace> decode_tdc_batch(const std::string &bytes);

/// Board profiles (clock, stage delay, envelope) and placement attenuation.
/// Boards: chipwhisperer, zcu104, vcu118, aws-f1.
/// Placements: adjacent, cross-die, cross-slr.
SensorConfig board_preset(const std::string &board);
double placement_attenuation(const std::string &placement);
const std::vector<std::string> &board_names();
const std::vector<std::string> &placement_names();

} // namespace bnnleak
