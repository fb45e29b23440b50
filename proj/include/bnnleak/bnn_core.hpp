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
#include "bnnleak/dataset_io.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace bnnleak {

/// 3x3 kernel of +1/-1 weights, row-major: w[a*3+b] multiplies the input
/// at offset (a-1, b-1) from the output position.
using BinaryKernel3x3 = std::array<int8_t, 9>;

/// Q1.8: value = q / 256, saturated to [-1, +1].
constexpr int kFracBits = 8;
constexpr int32_t kFixedOne = 1 << kFracBits;

struct FeatureMap {
    enum class Kind { integer, fixed, binary };
    int h = 0, w = 0, c = 0;
    Kind kind = Kind::integer;
    std::vector<int32_t> data; ///< HWC order: (y * w + x) * c + ch

    FeatureMap() = default;
    FeatureMap(int h_, int w_, int c_, Kind k)
        : h(h_), w(w_), c(c_), kind(k), data(size_t(h_) * w_ * c_, 0) {}
    int32_t &at(int y, int x, int ch) { return data[(size_t(y) * w + x) * c + ch]; }
    int32_t at(int y, int x, int ch) const { return data[(size_t(y) * w + x) * c + ch]; }
    bool operator==(const FeatureMap &) const = default;
};

/// rows x cols matrix of +1/-1. Convolution kernels are stored with
/// rows = output maps and cols = input maps * 9 (kernel-major per input).
struct BinaryMatrix {
    int rows = 0, cols = 0;
    std::vector<int8_t> w;

    int8_t at(int r, int c) const { return w[size_t(r) * cols + c]; }
    BinaryKernel3x3 kernel(int out, int in) const;
    bool operator==(const BinaryMatrix &) const = default;
};

/// Folded batch norm per channel: out = scale * in + shift with the scale
/// in Q.16 and the shift in Q.8.
struct BatchNormParams {
    std::vector<int32_t> scale_q16;
    std::vector<int32_t> shift_q8;
    bool operator==(const BatchNormParams &) const = default;
};

struct BnnModel {
    BinaryMatrix conv1; ///< 64 x 9
    BatchNormParams bn3;
    BinaryMatrix conv2; ///< 64 x (64*9)
    BatchNormParams bn7;
    BinaryMatrix fc1; ///< 500 x 3136
    BatchNormParams bn10;
    BinaryMatrix fc2; ///< 10 x 500
    BatchNormParams bn13;

    void validate() const;
    BinaryKernel3x3 first_kernel(int k = 0) const { return conv1.kernel(k, 0); }
    bool operator==(const BnnModel &) const = default;
};

using IntGrid = std::array<int32_t, kPixels>;

/// Same-size first-layer convolution with zero padding of width 1.
IntGrid conv2d_first_layer(const Image &image, const BinaryKernel3x3 &kernel);
/// All first-layer kernels; output 28x28xK integer map.
FeatureMap conv2d_first_layer(const Image &image, const BinaryMatrix &kernels);
/// Zero-padded same-size convolution over all input maps.
FeatureMap conv2d_binary_layer(const FeatureMap &in, const BinaryMatrix &kernels);
FeatureMap max_pool_2x2(const FeatureMap &in);
/// Integer input; Q1.8 output rounded half up and clamped to [-1, 1].
FeatureMap batch_norm(const FeatureMap &in, const BatchNormParams &p);
int32_t batch_norm_value(int32_t in, int32_t scale_q16, int32_t shift_q8);
/// +1 where in >= 0, else -1.
FeatureMap sign_nonlinearity(const FeatureMap &in);
std::vector<int32_t> fully_connected(const std::vector<int32_t> &in,
                                     const BinaryMatrix &weights);

struct Inference {
    std::array<int32_t, 10> scores{}; ///< Q1.8 outputs of the last batch norm
    int predicted = 0;                ///< argmax, lowest index on ties
};

Inference infer(const BnnModel &model, const Image &image);

/// Weights uniform on {-1,+1}. Batch-norm scales are drawn uniformly from
/// [1/R, 4/R] where R is the largest magnitude the preceding layer can
/// produce (9*255, 9*64, 3136, 500), shifts uniformly from [-1/4, 1/4].
BnnModel generate_random_model(uint64_t seed);

std::string encode_model(const BnnModel &model);
BnnModel decode_model(const std::string &bytes);
void save_model(const BnnModel &model, const std::string &path);
BnnModel load_model(const std::string &path);

} // namespace bnnleak
