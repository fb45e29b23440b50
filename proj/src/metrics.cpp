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

#include "bnnleak/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace bnnleak {

namespace {

double mean(const Grid &g) {
    double s = 0.0;
    for (double v : g)
        s += v;
    return s / kPixels;
}

} // namespace

double ccr(const Grid &a, const Grid &b) {
    const double ma = mean(a), mb = mean(b);
    double s = 0.0;
    for (int i = 0; i < kPixels; ++i)
        s += (a[i] - ma) * (b[i] - mb);
    return s;
}

double ccr_norm(const Grid &a, const Grid &b) {
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (int i = 0; i < kPixels; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0)
        throw Error(Errc::constant_image, "normalised correlation of a constant image");
    // sqrt(x) * sqrt(y) rather than sqrt(x * y): exact for a == b.
    return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

double mssim(const Grid &a, const Grid &b, int window) {
    if (window < 1 || window > kSide)
        throw Error(Errc::window_too_large, "SSIM window larger than the image");
    const int positions = kSide - window + 1;
    const double n = double(window) * window;
    double total = 0.0;
    for (int y0 = 0; y0 < positions; ++y0)
        for (int x0 = 0; x0 < positions; ++x0) {
            double sa = 0, sb = 0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    sa += a[y * kSide + x];
                    sb += b[y * kSide + x];
                }
            const double ma = sa / n, mb = sb / n;
            double vaa = 0, vbb = 0, vab = 0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const double da = a[y * kSide + x] - ma, db = b[y * kSide + x] - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            vaa /= n;
            vbb /= n;
            vab /= n;
            total += ((2 * ma * mb + kSsimC1) * (2 * vab + kSsimC2)) /
                     ((ma * ma + mb * mb + kSsimC1) * (vaa + vbb + kSsimC2));
        }
    return total / (double(positions) * positions);
}

SimilarityReport compare(const Grid &original, const Grid &recovered, int window) {
    SimilarityReport r;
    r.ccr = ccr(original, recovered);
    r.ccr_norm = ccr_norm(original, recovered);
    r.mssim = mssim(original, recovered, window);
    r.window = window;
    return r;
}

} // namespace bnnleak
