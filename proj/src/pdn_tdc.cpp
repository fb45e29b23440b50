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

#include "bnnleak/pdn_tdc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <sstream>

namespace bnnleak {

double Envelope::at(int t) const {
    switch (kind) {
    case Kind::none: return 0.0;
    case Kind::exponential: return amplitude_v * std::exp(-double(t) / cycles);
    case Kind::sinusoidal:
        return amplitude_v * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * t / cycles));
    }
    return 0.0;
}

std::string Envelope::canonical() const {
    char buf[128];
    const char *k = kind == Kind::none ? "none"
                    : kind == Kind::exponential ? "exponential" : "sinusoidal";
    std::snprintf(buf, sizeof buf, "envelope=%s,%.17g,%.17g", k, amplitude_v, cycles);
    return buf;
}

void SensorConfig::validate() const {
    if (stages <= 0 || stages > 65535)
        throw Error(Errc::precondition, "stage count out of range");
    if (!(stage_delay_ps > 0) || !(clock_mhz > 0))
        throw Error(Errc::precondition, "stage delay and clock must be positive");
    if (!(attenuation > 0 && attenuation <= 1.0))
        throw Error(Errc::precondition, "attenuation must lie in (0, 1]");
    if (noise_sigma < 0 || r_pdn < 0 || k_per_volt < 0)
        throw Error(Errc::precondition, "noise, coupling and k must be non-negative");
    if (stressor_gain < 1.0)
        throw Error(Errc::precondition, "stressor gain must be >= 1");
    if (calibration_target < 0 || calibration_target > stages)
        throw Error(Errc::precondition, "calibration target outside [0, stages]");
    if (envelope.kind != Envelope::Kind::none && !(envelope.cycles > 0))
        throw Error(Errc::precondition, "envelope time scale must be positive");
}

std::string SensorConfig::canonical() const {
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "stages=%d;d0=%.17g;clock_mhz=%.17g;r_pdn=%.17g;attenuation=%.17g;"
                  "sigma=%.17g;k=%.17g;target=%d;stressor=%.17g;nominal=%.17g;"
                  "max_init=%.17g;misalign=%d;",
                  stages, stage_delay_ps, clock_mhz, r_pdn, attenuation, noise_sigma,
                  k_per_volt, calibration_target, stressor_gain, nominal_drop_v,
                  max_initial_delay_ps, misalignment);
    return std::string(buf) + envelope.canonical();
}

VoltageTrace voltage_drop(const PowerTrace &power, const SensorConfig &cfg) {
    const double g = cfg.attenuation * cfg.stressor_gain * cfg.r_pdn;
    VoltageTrace v;
    for (int t = 0; t < kPixels; ++t)
        v[t] = g * power[t] + cfg.envelope.at(t);
    return v;
}

double calibrate(const SensorConfig &cfg, double nominal_drop_v) {
    cfg.validate();
    // HW(v) = floor(T / (d0 (1 + k v)) - init / d0); aim at target + 0.5 so
    // small perturbations either way do not cross a quantisation edge.
    const double init = cfg.clock_period_ps() / (1.0 + cfg.k_per_volt * nominal_drop_v) -
                        (cfg.calibration_target + 0.5) * cfg.stage_delay_ps;
    if (init < 0.0)
        throw Error(Errc::unsatisfiable_calibration,
                    "clock period too short for the requested target");
    if (init > cfg.max_initial_delay_ps)
        throw Error(Errc::unsatisfiable_calibration,
                    "clock period too long for the adjustable delay range");
    return init;
}

int tdc_hamming_weight(double drop_v, const SensorConfig &cfg, double initial_delay_ps) {
    const double scale = 1.0 + cfg.k_per_volt * drop_v;
    const double stages_reached =
        std::floor((cfg.clock_period_ps() - initial_delay_ps * scale) /
                   (cfg.stage_delay_ps * scale));
    return int(std::clamp(stages_reached, 0.0, double(cfg.stages)));
}

std::array<int, kPixels> tdc_pre_noise(const VoltageTrace &drops, const SensorConfig &cfg,
                                       double initial_delay_ps) {
    std::array<int, kPixels> hw;
    for (int t = 0; t < kPixels; ++t)
        hw[t] = tdc_hamming_weight(drops[t], cfg, initial_delay_ps);
    return hw;
}

namespace {

TdcTrace add_noise(const std::array<int, kPixels> &clean, const SensorConfig &cfg, Rng &rng) {
    TdcTrace out;
    for (int t = 0; t < kPixels; ++t) {
        long v = clean[t];
        if (cfg.noise_sigma > 0)
            v += std::lround(cfg.noise_sigma * rng.normal());
        out.hw[t] = uint16_t(std::clamp<long>(v, 0, cfg.stages));
    }
    return out;
}

} // namespace

TdcTrace sample_tdc(const VoltageTrace &drops, const SensorConfig &cfg,
                    double initial_delay_ps, Rng &rng) {
    return add_noise(tdc_pre_noise(drops, cfg, initial_delay_ps), cfg, rng);
}

PowerTrace apply_misalignment(const PowerTrace &power, int offset) {
    PowerTrace out{};
    for (int t = 0; t < kPixels; ++t) {
        const int s = t + offset;
        out[t] = (s >= 0 && s < kPixels) ? power[s] : 0.0;
    }
    return out;
}

std::vector<TdcTrace> capture_runs(const PowerTrace &power, const SensorConfig &cfg,
                                   int n_runs, uint64_t seed) {
    if (n_runs < 1)
        throw Error(Errc::precondition, "run count must be positive");
    const double init = calibrate(cfg, cfg.nominal_drop_v);
    const auto clean = tdc_pre_noise(
        voltage_drop(apply_misalignment(power, cfg.misalignment), cfg), cfg, init);
    const std::string hash = hex64(fnv1a64(cfg.canonical()));
    std::vector<TdcTrace> runs;
    runs.reserve(n_runs);
    for (int r = 0; r < n_runs; ++r) {
        Rng rng = Rng::derive(seed, uint64_t(r));
        runs.push_back(add_noise(clean, cfg, rng));
        runs.back().run_id = uint64_t(r);
        runs.back().config_hash = hash;
    }
    return runs;
}

std::string tdc_trace_csv(const TdcTrace &trace) {
    std::ostringstream o;
    o << "# run-id=" << trace.run_id << "\n# config-hash=" << trace.config_hash
      << "\ncycle,hw\n";
    for (int t = 0; t < kPixels; ++t)
        o << t << ',' << trace.hw[t] << '\n';
    return o.str();
}

std::string encode_tdc_batch(const std::vector<TdcTrace> &runs) {
    std::string o = "TDCB";
    const uint32_t n = uint32_t(runs.size());
    for (int s = 0; s < 32; s += 8)
        o.push_back(char((n >> s) & 0xff));
    o.reserve(o.size() + runs.size() * kPixels * 2);
    for (const TdcTrace &t : runs)
        for (uint16_t v : t.hw) {
            o.push_back(char(v & 0xff));
            o.push_back(char(v >> 8));
        }
    return o;
}

std::vector<TdcTrace> decode_tdc_batch(const std::string &b) {
    if (b.size() < 8 || std::memcmp(b.data(), "TDCB", 4) != 0)
        throw Error(Errc::malformed_magic, "not a TDC batch file");
    const auto *p = reinterpret_cast<const uint8_t *>(b.data());
    const uint32_t n = uint32_t(p[4]) | uint32_t(p[5]) << 8 | uint32_t(p[6]) << 16 |
                       uint32_t(p[7]) << 24;
    if (b.size() != 8 + size_t(n) * kPixels * 2)
        throw Error(Errc::truncated_file, "TDC batch size does not match its run count");
    std::vector<TdcTrace> runs(n);
    for (uint32_t r = 0; r < n; ++r) {
        runs[r].run_id = r;
        for (int t = 0; t < kPixels; ++t) {
            const size_t off = 8 + (size_t(r) * kPixels + t) * 2;
            runs[r].hw[t] = uint16_t(p[off] | p[off + 1] << 8);
        }
    }
    return runs;
}

SensorConfig board_preset(const std::string &board) {
    SensorConfig c;
    c.envelope.kind = Envelope::Kind::exponential;
    c.envelope.amplitude_v = 2.0e-3;
    c.envelope.cycles = 250.0;
    if (board == "chipwhisperer") {
        c.clock_mhz = 50.0;
        c.stage_delay_ps = 25.0; // Artix-7
    } else if (board == "zcu104") {
        c.clock_mhz = 120.0;
    } else if (board == "vcu118") {
        c.clock_mhz = 100.0;
    } else if (board == "aws-f1") {
        c.clock_mhz = 120.0;
        c.envelope.amplitude_v = 3.0e-3;
        c.envelope.cycles = 400.0;
    } else {
        throw Error(Errc::usage, "unknown board '" + board + "'");
    }
    return c;
}

double placement_attenuation(const std::string &placement) {
    if (placement == "adjacent")
        return 1.0;
    if (placement == "cross-die")
        return 0.3;
    if (placement == "cross-slr")
        return 0.2;
    throw Error(Errc::usage, "unknown placement '" + placement + "'");
}

const std::vector<std::string> &board_names() {
    static const std::vector<std::string> n{"chipwhisperer", "zcu104", "vcu118", "aws-f1"};
    return n;
}

const std::vector<std::string> &placement_names() {
    static const std::vector<std::string> n{"adjacent", "cross-die", "cross-slr"};
    return n;
}

} // namespace bnnleak
