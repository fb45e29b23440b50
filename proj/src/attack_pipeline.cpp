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

#include "bnnleak/attack_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace bnnleak {

AveragedTrace average_prefix(const std::vector<TdcTrace> &traces, size_t n) {
    if (n == 0 || traces.empty())
        throw Error(Errc::empty_list, "no traces to average");
    if (n > traces.size())
        throw Error(Errc::precondition, "prefix longer than the trace list");
    // Integer accumulation keeps prefixes exact and order independent.
    std::array<uint64_t, kPixels> acc{};
    for (size_t r = 0; r < n; ++r)
        for (int t = 0; t < kPixels; ++t)
            acc[t] += traces[r].hw[t];
    AveragedTrace a;
    a.n_runs = int(n);
    for (int t = 0; t < kPixels; ++t)
        a.values[t] = double(acc[t]) / double(n);
    return a;
}

AveragedTrace average_traces(const std::vector<TdcTrace> &traces) {
    return average_prefix(traces, traces.size());
}

FilteredTrace highpass_filter(const AveragedTrace &avg, int window) {
    if (window < 1)
        throw Error(Errc::precondition, "filter window must be positive");
    FilteredTrace f;
    f.window = window;
    // Summing differences to x[t] makes constant stretches cancel exactly.
    for (int t = window; t < kPixels; ++t) {
        double acc = 0.0;
        for (int k = t - window; k < t; ++k)
            acc += avg.values[t] - avg.values[k];
        f.values[t] = std::abs(acc) / window;
    }
    return f;
}

FilteredTrace butterworth_highpass(const AveragedTrace &avg, double cutoff) {
    if (!(cutoff > 0.0 && cutoff < 0.5))
        throw Error(Errc::precondition, "cutoff must lie in (0, 0.5) cycles^-1");
    const double wc = std::tan(std::numbers::pi * cutoff);
    const double b0 = 1.0 / (1.0 + wc);
    const double a1 = (wc - 1.0) / (1.0 + wc);
    FilteredTrace f;
    f.window = 0;
    double xprev = avg.values[0], yprev = 0.0;
    for (int t = 0; t < kPixels; ++t) {
        const double y = b0 * (avg.values[t] - xprev) - a1 * yprev;
        xprev = avg.values[t];
        yprev = y;
        f.values[t] = std::abs(y);
    }
    return f;
}

FilteredTrace apply_filter(const AveragedTrace &avg, const FilterParams &p) {
    return p.kind == FilterKind::running_mean ? highpass_filter(avg, p.window)
                                              : butterworth_highpass(avg, p.cutoff);
}

Histogram build_histogram(const Grid &values, int bins) {
    if (bins < 2)
        throw Error(Errc::precondition, "histogram needs at least two bins");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    Histogram h;
    if (*lo == *hi) {
        h.degenerate = true;
        h.edges = {0.0, *hi > 0 ? *hi : 1.0};
        h.counts = {kPixels};
        return h;
    }
    const double mx = *hi;
    h.edges.resize(bins + 1);
    for (int i = 0; i <= bins; ++i)
        h.edges[i] = mx * i / bins;
    h.counts.assign(bins, 0);
    for (double v : values) {
        int b = int(std::floor(v / mx * bins));
        h.counts[std::clamp(b, 0, bins - 1)]++;
    }
    return h;
}

const char *method_name(ThresholdChoice::Method m) {
    switch (m) {
    case ThresholdChoice::Method::valley: return "valley";
    case ThresholdChoice::Method::otsu: return "otsu";
    case ThresholdChoice::Method::multi_otsu: return "multi-otsu";
    case ThresholdChoice::Method::manual: return "manual";
    case ThresholdChoice::Method::degenerate: return "degenerate";
    }
    return "?";
}

double otsu_threshold(const Histogram &h) {
    const int bins = int(h.counts.size());
    double total = 0, sum_all = 0;
    for (int i = 0; i < bins; ++i) {
        const double c = 0.5 * (h.edges[i] + h.edges[i + 1]);
        total += h.counts[i];
        sum_all += h.counts[i] * c;
    }
    double w0 = 0, sum0 = 0, best = -1.0, thr = h.edges[1];
    for (int i = 1; i < bins; ++i) {
        const double c = 0.5 * (h.edges[i - 1] + h.edges[i]);
        w0 += h.counts[i - 1];
        sum0 += h.counts[i - 1] * c;
        const double w1 = total - w0;
        if (w0 == 0 || w1 == 0)
            continue;
        const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
        const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if (between > best) {
            best = between;
            thr = h.edges[i];
        }
    }
    return thr;
}

double multi_otsu_threshold(const Histogram &h) {
    const int bins = int(h.counts.size());
    if (bins < 3)
        return otsu_threshold(h);
    // Prefix sums of weight and first moment over bin centres.
    std::vector<double> w(bins + 1, 0.0), m(bins + 1, 0.0);
    for (int i = 0; i < bins; ++i) {
        const double c = 0.5 * (h.edges[i] + h.edges[i + 1]);
        w[i + 1] = w[i] + h.counts[i];
        m[i + 1] = m[i] + h.counts[i] * c;
    }
    auto term = [&](int a, int b) {
        const double ww = w[b] - w[a], mm = m[b] - m[a];
        return ww > 0 ? mm * mm / ww : -1.0;
    };
    double best = -1.0;
    int cut = 2;
    for (int i = 1; i < bins - 1; ++i)
        for (int j = i + 1; j < bins; ++j) {
            const double a = term(0, i), b = term(i, j), c = term(j, bins);
            if (a < 0 || b < 0 || c < 0)
                continue;
            // Maximising the summed squared class means is equivalent to
            // maximising the between-class variance.
            if (a + b + c > best) {
                best = a + b + c;
                cut = j;
            }
        }
    return best < 0 ? otsu_threshold(h) : h.edges[cut];
}

ThresholdChoice select_threshold(const Histogram &h, const ThresholdParams &p) {
    ThresholdChoice c;
    if (p.mode == ThresholdParams::Mode::manual) {
        c.value = p.manual_value;
        c.method = ThresholdChoice::Method::manual;
        return c;
    }
    if (h.degenerate)
        throw Error(Errc::precondition, "threshold needs a non-degenerate histogram");
    if (p.mode == ThresholdParams::Mode::otsu) {
        c.value = otsu_threshold(h);
        c.method = ThresholdChoice::Method::otsu;
        return c;
    }
    if (p.mode == ThresholdParams::Mode::multi_otsu) {
        c.value = multi_otsu_threshold(h);
        c.method = ThresholdChoice::Method::multi_otsu;
        return c;
    }
    const int peak = *std::max_element(h.counts.begin(), h.counts.end());
    const double near_empty = std::max(1.0, p.near_empty_fraction * peak);
    const int bins = int(h.counts.size());
    int best_len = 0, best_end = -1;
    for (int i = 0; i < bins;) {
        int j = i;
        while (j + 1 < bins && h.counts[j + 1] <= h.counts[j])
            ++j;
        const int len = j - i + 1;
        // A maximal run that stops before the last bin is followed by a rise.
        if (j + 1 < bins && h.counts[j] <= near_empty && len >= p.min_run && len > best_len) {
            best_len = len;
            best_end = j;
        }
        i = j + 1;
    }
    if (best_end >= 0) {
        c.value = h.edges[best_end + 1];
        c.method = ThresholdChoice::Method::valley;
    } else {
        c.value = otsu_threshold(h);
        c.method = ThresholdChoice::Method::otsu;
        c.fallback = true;
    }
    return c;
}

Grid reconstruct_binary(const FilteredTrace &f, double threshold) {
    Grid g;
    for (int i = 0; i < kPixels; ++i)
        g[i] = f.values[i] > threshold ? 255.0 : 0.0;
    return g;
}

namespace {

// Forward differences, zero across the far border (Neumann).
void gradient(const Grid &u, Grid &gx, Grid &gy) {
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
            const int i = y * kSide + x;
            gx[i] = x + 1 < kSide ? u[i + 1] - u[i] : 0.0;
            gy[i] = y + 1 < kSide ? u[i + kSide] - u[i] : 0.0;
        }
}

// Negative adjoint of gradient().
void divergence(const Grid &px, const Grid &py, Grid &d) {
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
            const int i = y * kSide + x;
            double v = 0.0;
            if (x + 1 < kSide)
                v += px[i];
            if (x > 0)
                v -= px[i - 1];
            if (y + 1 < kSide)
                v += py[i];
            if (y > 0)
                v -= py[i - kSide];
            d[i] = v;
        }
}

} // namespace

double rof_energy(const Grid &u, const Grid &f, double tv_weight) {
    Grid gx, gy;
    gradient(u, gx, gy);
    double tv = 0.0, fid = 0.0;
    for (int i = 0; i < kPixels; ++i) {
        tv += std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
        fid += (u[i] - f[i]) * (u[i] - f[i]);
    }
    return tv + fid / (2.0 * tv_weight);
}

RofResult rof_denoise(const Grid &f, const RofParams &p) {
    for (double v : f)
        if (!(v >= 0.0 && v <= 255.0))
            throw Error(Errc::precondition, "denoiser input outside [0,255]");
    if (!(p.tau > 0) || !(p.tv_weight > 0) || p.max_iter < 1)
        throw Error(Errc::precondition, "invalid denoiser parameters");
    RofResult r;
    Grid u = f, px{}, py{}, gx, gy, d;
    if (p.record_energy)
        r.energy.push_back(rof_energy(u, f, p.tv_weight));
    const double step = p.tau / p.tv_weight;
    for (int k = 0; k < p.max_iter; ++k) {
        gradient(u, gx, gy);
        for (int i = 0; i < kPixels; ++i) {
            const double nx = px[i] + step * gx[i], ny = py[i] + step * gy[i];
            const double n = std::max(1.0, std::sqrt(nx * nx + ny * ny));
            px[i] = nx / n;
            py[i] = ny / n;
        }
        divergence(px, py, d);
        double change = 0.0;
        for (int i = 0; i < kPixels; ++i) {
            const double un = f[i] + p.tv_weight * d[i];
            change += (un - u[i]) * (un - u[i]);
            u[i] = un;
        }
        r.iterations = k + 1;
        if (p.record_energy)
            r.energy.push_back(rof_energy(u, f, p.tv_weight));
        if (std::sqrt(change / kPixels) < p.tol) {
            r.converged = true;
            break;
        }
    }
    for (int i = 0; i < kPixels; ++i)
        r.u[i] = std::clamp(u[i], 0.0, 255.0);
    return r;
}

RecoveredImage run_attack(const AveragedTrace &avg, const AttackParams &p) {
    RecoveredImage out;
    out.averaged = avg;
    out.provenance.n_runs = avg.n_runs;
    out.filtered = apply_filter(avg, p.filter);
    out.histogram = build_histogram(out.filtered.values, p.bins);
    if (out.histogram.degenerate && p.threshold.mode != ThresholdParams::Mode::manual) {
        // Flat filtered trace: nothing stands out, everything is background.
        out.threshold.value = out.histogram.edges.back();
        out.threshold.method = ThresholdChoice::Method::degenerate;
        out.threshold.fallback = true;
    } else {
        out.threshold = select_threshold(out.histogram, p.threshold);
    }
    out.binary = reconstruct_binary(out.filtered, out.threshold.value);
    if (p.denoise) {
        const RofResult r = rof_denoise(out.binary, p.rof);
        out.denoised = r.u;
        out.rof_iterations = r.iterations;
        out.rof_converged = r.converged;
    } else {
        out.denoised = out.binary;
    }
    return out;
}

RecoveredImage run_attack(const std::vector<TdcTrace> &traces, const AttackParams &p) {
    RecoveredImage r = run_attack(average_traces(traces), p);
    r.provenance.config_hash = traces.front().config_hash;
    return r;
}

std::string trace_csv(const Grid &values, const char *column) {
    std::ostringstream o;
    o << "cycle," << column << '\n';
    char buf[64];
    for (int t = 0; t < kPixels; ++t) {
        std::snprintf(buf, sizeof buf, "%d,%.17g\n", t, values[t]);
        o << buf;
    }
    return o.str();
}

std::string histogram_csv(const Histogram &h) {
    std::ostringstream o;
    o << "bin,lower,upper,count\n";
    char buf[96];
    for (size_t i = 0; i < h.counts.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d\n", i, h.edges[i], h.edges[i + 1],
                      h.counts[i]);
        o << buf;
    }
    return o.str();
}

} // namespace bnnleak
