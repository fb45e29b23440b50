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

#include "bnnleak/conv_power.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace bnnleak {

Window LineBuffer::step(int32_t pixel) {
    for (int j = kRows * kWords - 1; j > 0; --j)
        words_[j] = words_[j - 1];
    words_[0] = pixel;
    ++cycle_;
    Window w;
    for (int r = 0; r < kRows; ++r)
        for (int c = 0; c < 3; ++c)
            w[(2 - r) * 3 + (2 - c)] = words_[r * kWords + c];
    return w;
}

ActivityModelConfig ActivityModelConfig::toggle_only() {
    ActivityModelConfig c;
    c.toggle_weight = 1.0;
    c.lane_gain = 0.0;
    return c;
}

void ActivityModelConfig::validate() const {
    if (width < 12 || width > 31)
        throw Error(Errc::precondition, "node width must hold 9*255 (12..31 bits)");
    if (alpha < 0 || toggle_weight < 0 || lane_gain < 0 || lane_gamma <= 0 ||
        other_kernels_power < 0)
        throw Error(Errc::precondition, "activity model coefficients must be non-negative");
}

std::string ActivityModelConfig::canonical() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "alpha=%.17g;width=%d;toggle_weight=%.17g;lane_gain=%.17g;"
                  "lane_gamma=%.17g;other_kernels_power=%.17g",
                  alpha, width, toggle_weight, lane_gain, lane_gamma, other_kernels_power);
    return buf;
}

TreeNodes adder_tree(const Window &w, const BinaryKernel3x3 &k) {
    TreeNodes n;
    for (int i = 0; i < 9; ++i)
        n[i] = k[i] * w[i];
    n[9] = n[0] + n[1];
    n[10] = n[2] + n[3];
    n[11] = n[4] + n[5];
    n[12] = n[6] + n[7];
    n[13] = n[9] + n[10];
    n[14] = n[11] + n[12];
    n[15] = n[13] + n[14];
    n[16] = n[15] + n[8];
    return n;
}

int hamming_distance(int32_t a, int32_t b, int width) {
    const uint32_t mask = width >= 32 ? ~0u : ((1u << width) - 1);
    return std::popcount((uint32_t(a) ^ uint32_t(b)) & mask);
}

PowerTrace simulate_first_kernel_trace(const Image &image, const BinaryKernel3x3 &kernel,
                                       const ActivityModelConfig &cfg) {
    cfg.validate();
    LineBuffer lb;
    TreeNodes prev{};
    PowerTrace p{};
    for (int t = 0; t < kPixels; ++t) {
        const Window w = lb.step(image.pixels[t]);
        const TreeNodes n = adder_tree(w, kernel);
        int toggles = 0;
        for (int j = 0; j < kTreeNodes; ++j)
            toggles += hamming_distance(n[j], prev[j], cfg.width);
        prev = n;
        const double lane = std::pow(std::abs(n[8]) / 255.0, cfg.lane_gamma);
        p[t] = cfg.alpha * (cfg.toggle_weight * toggles + cfg.lane_gain * lane) +
               cfg.other_kernels_power;
    }
    return p;
}

std::vector<int> foreground_cycle_set(const Image &image, int threshold) {
    if (threshold < 0 || threshold > 255)
        throw Error(Errc::precondition, "threshold outside [0,255]");
    std::vector<int> s;
    for (int i = 0; i < kPixels; ++i)
        if (image.pixels[i] > threshold)
            s.push_back(i);
    return s;
}

std::string power_trace_csv(const PowerTrace &trace, const std::string &config_hash) {
    std::ostringstream o;
    o << "# config-hash=" << config_hash << "\ncycle,power\n";
    char buf[64];
    for (int t = 0; t < kPixels; ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, trace[t]);
        o << buf;
    }
    return o.str();
}

} // namespace bnnleak
