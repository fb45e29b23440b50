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

namespace bnnleak {

/// Sum of (a - mean a) * (b - mean b).
double ccr(const Grid &a, const Grid &b);
/// ccr normalised by the product of the centred norms; throws
/// constant-image when either image has zero variance.
double ccr_norm(const Grid &a, const Grid &b);

constexpr double kSsimC1 = (0.01 * 255) * (0.01 * 255);
constexpr double kSsimC2 = (0.03 * 255) * (0.03 * 255);

/// Mean SSIM over all window x window positions (stride 1, uniform weights,
/// population moments).
double mssim(const Grid &a, const Grid &b, int window = 11);

struct SimilarityReport {
    double ccr = 0.0;
    double ccr_norm = 0.0;
    double mssim = 0.0;
    int window = 11;
};

SimilarityReport compare(const Grid &original, const Grid &recovered, int window = 11);

} // namespace bnnleak
