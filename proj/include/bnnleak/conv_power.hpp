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

#include "bnnleak/bnn_core.hpp"
#include "bnnleak/dataset_io.hpp"

#include <array>
#include <string>
#include <vector>

namespace bnnleak {

/// Per-cycle power of the convolution unit, one sample per input pixel.
using PowerTrace = Grid;

/// Window words P1..P9 (index 0..8), row-major over the 3x3 window.
using Window = std::array<int32_t, 9>;

/// Three chained 28-word shift rows. Words are numbered from the insertion
/// end: word 0 of row 0 holds the newest pixel, word 27 of row r feeds word
/// 0 of row r+1. The window taps the first three words of every row, so at
/// cycle i it sees pixels i-58..i-56, i-30..i-28 and i-2..i (P1..P9).
class LineBuffer {
  public:
    static constexpr int kRows = 3;
    static constexpr int kWords = kSide;

    /// Shifts `pixel` in and returns the window for this cycle.
    Window step(int32_t pixel);
    int32_t word(int row, int idx) const { return words_[row * kWords + idx]; }
    long cycle() const { return cycle_; }

  private:
    std::array<int32_t, kRows * kWords> words_{};
    long cycle_ = 0;
};

/// Switching-activity model of the first-kernel datapath.
///
/// power = alpha * (toggle_weight * T + lane_gain * (|w9 * P9| / 255)^lane_gamma)
///         + other_kernels_power
///
/// T is the Hamming distance, summed over the 17 adder-tree nodes (9
/// products, 4+2+1 pair sums with P9 passed through, final accumulate), between
/// this cycle's and the previous cycle's `width`-bit two's complement node
/// values. The second term is the level-dependent draw of the lane that
/// receives the incoming pixel.
struct ActivityModelConfig {
    double alpha = 1.0;
    int width = 12;
    double toggle_weight = 0.02;
    double lane_gain = 48.0;
    double lane_gamma = 1.5;
    double other_kernels_power = 0.0;

    /// Pure adder-tree toggle count, no lane term.
    static ActivityModelConfig toggle_only();
    void validate() const;
    std::string canonical() const;
};

constexpr int kTreeNodes = 17;
using TreeNodes = std::array<int32_t, kTreeNodes>;

TreeNodes adder_tree(const Window &w, const BinaryKernel3x3 &k);
/// Hamming distance between two values truncated to `width` bits.
int hamming_distance(int32_t a, int32_t b, int width);

PowerTrace simulate_first_kernel_trace(const Image &image, const BinaryKernel3x3 &kernel,
                                       const ActivityModelConfig &cfg);

/// Cycles whose pixel exceeds `threshold`, ascending.
std::vector<int> foreground_cycle_set(const Image &image, int threshold);

/// `cycle,power` CSV with a config-hash comment header.
std::string power_trace_csv(const PowerTrace &trace, const std::string &config_hash);

} // namespace bnnleak
