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
#include "bnnleak/bnn_core.hpp"
#include "bnnleak/conv_power.hpp"
#include "bnnleak/metrics.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace bnnleak;

namespace {

AveragedTrace from_fn(double (*f)(int)) {
    AveragedTrace a;
    a.n_runs = 1;
    for (int t = 0; t < kPixels; ++t)
        a.values[t] = f(t);
    return a;
}

Histogram hist_from_counts(const std::vector<int> &counts) {
    Histogram h;
    h.counts = counts;
    for (size_t i = 0; i <= counts.size(); ++i)
        h.edges.push_back(double(i));
    return h;
}

Grid random_binary(Rng &rng, double p = 0.3) {
    Grid g;
    for (auto &v : g)
        v = rng.uniform() < p ? 255.0 : 0.0;
    return g;
}

std::vector<TdcTrace> digit_runs(const Image &im, int n, uint64_t seed, SensorConfig c = {}) {
    const BinaryKernel3x3 k = generate_random_model(1).first_kernel();
    return capture_runs(simulate_first_kernel_trace(im, k, ActivityModelConfig{}), c, n, seed);
}

AttackParams multi_otsu_attack() {
    AttackParams p;
    p.threshold.mode = ThresholdParams::Mode::multi_otsu;
    return p;
}

} // namespace

TEST(Averaging, SingleTraceAndMirrorPair) {
    TdcTrace a, b;
    Rng rng(1);
    for (int t = 0; t < kPixels; ++t) {
        a.hw[t] = uint16_t(rng.next() % 257);
        b.hw[t] = uint16_t(256 - a.hw[t]);
    }
    const AveragedTrace one = average_traces({a});
    for (int t = 0; t < kPixels; ++t)
        EXPECT_EQ(one.values[t], double(a.hw[t]));
    const AveragedTrace pair = average_traces({a, b});
    for (double v : pair.values)
        EXPECT_EQ(v, 128.0);
    try {
        average_traces({});
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.code(), Errc::empty_list);
    }
}

TEST(Averaging, NoisyConstantWithinThreeSigma) {
    const SensorConfig c;
    const auto runs = capture_runs(PowerTrace{}, c, 100, 2);
    const AveragedTrace a = average_traces(runs);
    int outside = 0;
    for (double v : a.values)
        outside += std::abs(v - 128.0) > 3 * c.noise_sigma / 10.0;
    // 3 sigma bounds are exceeded with probability 0.27% per cycle.
    EXPECT_LE(outside, 8);
}

TEST(Averaging, PrefixMatchesIndependentAveraging) {
    const SensorConfig c;
    const auto runs = capture_runs(PowerTrace{}, c, 500, 3);
    const AveragedTrace p = average_prefix(runs, 100);
    std::vector<TdcTrace> first(runs.begin(), runs.begin() + 100);
    EXPECT_EQ(p.values, average_traces(first).values);
    EXPECT_EQ(p.n_runs, 100);
    // Independent 100-run batch: same expectation, difference ~ N(0, 2 s^2 / 100).
    const AveragedTrace q = average_traces(capture_runs(PowerTrace{}, c, 100, 4));
    double md = 0, vd = 0;
    for (int t = 0; t < kPixels; ++t)
        md += p.values[t] - q.values[t];
    md /= kPixels;
    for (int t = 0; t < kPixels; ++t)
        vd += (p.values[t] - q.values[t] - md) * (p.values[t] - q.values[t] - md);
    vd /= kPixels - 1;
    const double expect_var = 2 * (c.noise_sigma * c.noise_sigma + 1.0 / 12) / 100;
    EXPECT_LT(std::abs(md), 4 * std::sqrt(expect_var / kPixels));
    EXPECT_NEAR(vd / expect_var, 1.0, 0.15);
    EXPECT_THROW(average_prefix(runs, 501), Error);
}

TEST(Highpass, ConstantTracesFilterToZero) {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        AveragedTrace a;
        a.values.fill(256.0 * rng.uniform());
        for (int w : {1, 10, 37}) {
            const FilteredTrace f = highpass_filter(a, w);
            for (double v : f.values)
                ASSERT_EQ(v, 0.0);
        }
    }
}

TEST(Highpass, RampAndImpulse) {
    const AveragedTrace ramp = from_fn([](int t) { return 0.25 * t; });
    const FilteredTrace f = highpass_filter(ramp, 10);
    for (int t = 10; t < kPixels; ++t)
        EXPECT_NEAR(f.values[t], 0.25 * 11 / 2, 1e-9);
    for (int t = 0; t < 10; ++t)
        EXPECT_EQ(f.values[t], 0.0);
    AveragedTrace imp;
    imp.values[300] = 7.0;
    EXPECT_EQ(highpass_filter(imp, 10).values[300], 7.0);
}

TEST(Highpass, SinusoidalEnvelopeAttenuatedBy20dB) {
    // Envelope period of one full inference.
    for (double amp : {2.0, 40.0}) {
        AveragedTrace a;
        double in = 0;
        for (int t = 0; t < kPixels; ++t) {
            const double e = amp * std::sin(2 * std::numbers::pi * t / kPixels);
            a.values[t] = 128.0 + e;
            in += e * e;
        }
        const FilteredTrace f = highpass_filter(a, 10);
        double out = 0;
        for (double v : f.values)
            out += v * v;
        EXPECT_GE(10 * std::log10(in / out), 20.0) << amp;
    }
}

TEST(Highpass, BoardEnvelopeGoneAfterFilter) {
    // Zero activity, zero noise: the averaged trace holds only the envelope.
    SensorConfig c;
    c.noise_sigma = 0;
    c.envelope = {Envelope::Kind::sinusoidal, 40e-3, double(kPixels)};
    const AveragedTrace a = average_traces(capture_runs(PowerTrace{}, c, 1, 1));
    double mean = 0;
    for (double v : a.values)
        mean += v / kPixels;
    double in = 0, out = 0;
    for (double v : a.values)
        in += (v - mean) * (v - mean);
    for (double v : highpass_filter(a, 10).values)
        out += v * v;
    EXPECT_GT(in, 0.0);
    EXPECT_GE(10 * std::log10(in / out), 20.0);
}

TEST(Butterworth, RejectsDcAndPassesFastEdges) {
    AveragedTrace a;
    a.values.fill(100.0);
    for (double v : butterworth_highpass(a, 0.05).values)
        EXPECT_NEAR(v, 0.0, 1e-12);
    a.values[400] = 110.0;
    EXPECT_GT(butterworth_highpass(a, 0.05).values[400], 8.0);
    EXPECT_THROW(butterworth_highpass(a, 0.7), Error);
}

TEST(HistogramTest, DegenerateAndTwoValues) {
    const Histogram z = build_histogram(Grid{});
    EXPECT_TRUE(z.degenerate);
    Grid g{};
    for (int i = 0; i < 100; ++i)
        g[i] = 3.0;
    const Histogram h = build_histogram(g, 40);
    EXPECT_FALSE(h.degenerate);
    ASSERT_EQ(h.counts.size(), 40u);
    EXPECT_EQ(h.counts.front(), kPixels - 100);
    EXPECT_EQ(h.counts.back(), 100);
    EXPECT_EQ(h.edges.back(), 3.0);
    int nonzero = 0;
    for (int c : h.counts)
        nonzero += c > 0;
    EXPECT_EQ(nonzero, 2);
}

TEST(Threshold, ConstructedValley) {
    std::vector<int> counts{50, 40, 20, 5, 1, 0, 3, 8, 6, 4, 2, 1};
    counts.resize(40, 0);
    const ThresholdChoice c = select_threshold(hist_from_counts(counts), {});
    EXPECT_EQ(c.method, ThresholdChoice::Method::valley);
    EXPECT_FALSE(c.fallback);
    EXPECT_EQ(c.value, 6.0); // upper edge of bin 5
}

TEST(Threshold, UnimodalFallsBackToOtsu) {
    std::vector<int> counts;
    for (int i = 0; i < 40; ++i)
        counts.push_back(400 - 10 * i);
    const Histogram h = hist_from_counts(counts);
    const ThresholdChoice c = select_threshold(h, {});
    EXPECT_TRUE(c.fallback);
    EXPECT_EQ(c.method, ThresholdChoice::Method::otsu);
    EXPECT_EQ(c.value, otsu_threshold(h));
}

TEST(Threshold, OtsuMatchesBruteForce) {
    Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        std::vector<int> counts(40);
        for (auto &c : counts)
            c = int(rng.next() % 50);
        const Histogram h = hist_from_counts(counts);
        // Brute force: between-class variance over every cut, centres as values.
        double best = -1, thr = 0;
        for (int cut = 1; cut < 40; ++cut) {
            double w0 = 0, w1 = 0, s0 = 0, s1 = 0;
            for (int i = 0; i < 40; ++i) {
                (i < cut ? w0 : w1) += counts[i];
                (i < cut ? s0 : s1) += counts[i] * (i + 0.5);
            }
            if (w0 == 0 || w1 == 0)
                continue;
            const double v = w0 * w1 * std::pow(s0 / w0 - s1 / w1, 2);
            if (v > best + 1e-9) {
                best = v;
                thr = cut;
            }
        }
        ASSERT_EQ(otsu_threshold(h), thr) << "case " << t;
    }
}

TEST(Threshold, MultiOtsuMatchesBruteForce) {
    Rng rng(7);
    for (int t = 0; t < 100; ++t) {
        std::vector<int> counts(40);
        for (auto &c : counts)
            c = int(rng.next() % 50);
        const Histogram h = hist_from_counts(counts);
        double best = -1;
        int upper = 0;
        for (int i = 1; i < 39; ++i)
            for (int j = i + 1; j < 40; ++j) {
                double w[3] = {0, 0, 0}, s[3] = {0, 0, 0}, tot = 0, mean = 0;
                for (int b = 0; b < 40; ++b) {
                    const int k = b < i ? 0 : b < j ? 1 : 2;
                    w[k] += counts[b];
                    s[k] += counts[b] * (b + 0.5);
                    tot += counts[b];
                    mean += counts[b] * (b + 0.5);
                }
                if (w[0] == 0 || w[1] == 0 || w[2] == 0)
                    continue;
                mean /= tot;
                double between = 0;
                for (int k = 0; k < 3; ++k)
                    between += w[k] * std::pow(s[k] / w[k] - mean, 2);
                if (between > best * (1 + 1e-12)) {
                    best = between;
                    upper = j;
                }
            }
        ASSERT_EQ(multi_otsu_threshold(h), double(upper)) << "case " << t;
    }
}

TEST(Reconstruct, ThresholdExtremesAndMonotonicity) {
    Rng rng(8);
    FilteredTrace f;
    for (auto &v : f.values)
        v = rng.uniform() < 0.5 ? 0.0 : 10 * rng.uniform();
    const double mx = *std::max_element(f.values.begin(), f.values.end());
    for (double v : reconstruct_binary(f, mx + 1))
        EXPECT_EQ(v, 0.0);
    const Grid low = reconstruct_binary(f, 0.0);
    for (int i = 0; i < kPixels; ++i)
        EXPECT_EQ(low[i], f.values[i] > 0 ? 255.0 : 0.0);
    Grid prev = low;
    for (double thr = 0.5; thr < 11; thr += 0.5) {
        const Grid g = reconstruct_binary(f, thr);
        for (int i = 0; i < kPixels; ++i) {
            ASSERT_TRUE(g[i] == 0.0 || g[i] == 255.0);
            ASSERT_LE(g[i], prev[i]);
        }
        prev = g;
    }
}

TEST(Rof, ConstantImagesAreFixedPoints) {
    for (double c : {0.0, 17.0, 255.0}) {
        Grid g;
        g.fill(c);
        const RofResult r = rof_denoise(g);
        EXPECT_EQ(r.u, g);
        EXPECT_TRUE(r.converged);
    }
}

TEST(Rof, StrayPixelSuppressed) {
    Grid g{};
    g[14 * kSide + 14] = 255;
    const RofResult r = rof_denoise(g);
    EXPECT_LT(r.u[14 * kSide + 14], 255.0);
}

TEST(Rof, EnergyNonIncreasingOnRandomBinaryImages) {
    Rng rng(9);
    RofParams p;
    p.record_energy = true;
    for (int t = 0; t < 20; ++t) {
        const RofResult r = rof_denoise(random_binary(rng, 0.1 + 0.04 * t), p);
        ASSERT_GE(r.energy.size(), 2u);
        for (size_t k = 1; k < r.energy.size(); ++k)
            ASSERT_LE(r.energy[k], r.energy[k - 1] * (1 + 1e-12)) << "image " << t << " iter " << k;
    }
}

TEST(Rof, ShiftEquivariantAwayFromClamp) {
    Rng rng(10);
    Grid f;
    for (auto &v : f)
        v = rng.uniform() < 0.3 ? 150.0 : 50.0;
    Grid g = f;
    for (auto &v : g)
        v += 40.0;
    const RofResult a = rof_denoise(f), b = rof_denoise(g);
    for (int i = 0; i < kPixels; ++i)
        EXPECT_NEAR(b.u[i], a.u[i] + 40.0, 1e-9);
}

TEST(Rof, OutputInRangeAndInputChecked) {
    Rng rng(11);
    const RofResult r = rof_denoise(random_binary(rng));
    for (double v : r.u) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 255.0);
    }
    Grid bad{};
    bad[0] = 300;
    EXPECT_THROW(rof_denoise(bad), Error);
}

TEST(Pipeline, DeterministicGivenInputs) {
    const auto digits = bnnleak::testing::mnist_first_per_class();
    const auto runs = digit_runs(digits[6], 300, 1);
    const RecoveredImage a = run_attack(runs, AttackParams{}), b = run_attack(runs, AttackParams{});
    EXPECT_EQ(a.binary, b.binary);
    EXPECT_EQ(a.denoised, b.denoised);
    EXPECT_EQ(a.threshold.value, b.threshold.value);
}

TEST(Pipeline, DigitHistogramIsBimodal) {
    const auto digits = bnnleak::testing::mnist_first_per_class();
    const RecoveredImage r = run_attack(digit_runs(digits[6], 3000, 2), multi_otsu_attack());
    // Most mass sits low; a smaller separate population sits above the cut.
    int below = 0, above = 0;
    for (size_t i = 0; i < r.histogram.counts.size(); ++i)
        (r.histogram.edges[i + 1] <= r.threshold.value ? below : above) += r.histogram.counts[i];
    EXPECT_GT(below, 2 * above);
    EXPECT_GT(above, 40);
}

TEST(Pipeline, ThresholdKeepsMostForegroundCycles) {
    const auto digits = bnnleak::testing::mnist_first_per_class();
    for (const Image &im : digits) {
        const RecoveredImage r = run_attack(digit_runs(im, 3000, 3), multi_otsu_attack());
        const auto fg = foreground_cycle_set(im, 0);
        int hit = 0;
        for (int t : fg)
            hit += r.binary[t] > 0;
        EXPECT_GE(hit, 0.9 * double(fg.size())) << "label " << im.label;
    }
}

TEST(Pipeline, RawReconstructionCorrelatesWithDigit) {
    const auto digits = bnnleak::testing::mnist_first_per_class();
    const RecoveredImage r = run_attack(digit_runs(digits[6], 3000, 4), multi_otsu_attack());
    EXPECT_GT(ccr_norm(digits[6].to_grid(), r.binary), 0.5);
    EXPECT_GT(ccr_norm(digits[6].to_grid(), r.denoised), 0.6);
}

TEST(Pipeline, DenoisingHelpsOnAverage) {
    const auto digits = bnnleak::testing::mnist_first_per_class();
    double gain = 0;
    for (const Image &im : digits) {
        const RecoveredImage r = run_attack(digit_runs(im, 1000, 5), multi_otsu_attack());
        const double raw = ccr_norm(im.to_grid(), r.binary);
        const double den = ccr_norm(im.to_grid(), r.denoised);
        EXPECT_GE(den, raw - 0.05) << "label " << im.label;
        gain += den - raw;
    }
    EXPECT_GT(gain, 0.0);
}

TEST(Pipeline, FlatTraceIsAllBackground) {
    std::vector<TdcTrace> runs(3);
    for (auto &r : runs)
        r.hw.fill(128);
    const RecoveredImage r = run_attack(runs, AttackParams{});
    EXPECT_EQ(r.threshold.method, ThresholdChoice::Method::degenerate);
    for (double v : r.binary)
        EXPECT_EQ(v, 0.0);
}

TEST(Csv, TraceAndHistogramLayout) {
    const std::string t = trace_csv(Grid{}, "hw_mean");
    EXPECT_EQ(t.rfind("cycle,hw_mean\n0,0\n", 0), 0u);
    EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), kPixels + 1);
    const std::string h = histogram_csv(hist_from_counts({1, 2}));
    EXPECT_EQ(h, "bin,lower,upper,count\n0,0,1,1\n1,1,2,2\n");
}
