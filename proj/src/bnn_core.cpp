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

#include "bnnleak/bnn_core.hpp"

#include <algorithm>
#include <cstring>

namespace bnnleak {

BinaryKernel3x3 BinaryMatrix::kernel(int out, int in) const {
    BinaryKernel3x3 k;
    for (int j = 0; j < 9; ++j)
        k[j] = at(out, in * 9 + j);
    return k;
}

namespace {

void check_binary(const BinaryMatrix &m, int rows, int cols, const char *name) {
    if (m.rows != rows || m.cols != cols || m.w.size() != size_t(rows) * cols)
        throw Error(Errc::shape_mismatch, std::string(name) + " has wrong shape");
    for (int8_t v : m.w)
        if (v != 1 && v != -1)
            throw Error(Errc::precondition, std::string(name) + " weight not +/-1");
}

void check_bn(const BatchNormParams &p, int ch, const char *name) {
    if (p.scale_q16.size() != size_t(ch) || p.shift_q8.size() != size_t(ch))
        throw Error(Errc::shape_mismatch, std::string(name) + " has wrong channel count");
}

} // namespace

void BnnModel::validate() const {
    check_binary(conv1, 64, 9, "conv1");
    check_bn(bn3, 64, "bn3");
    check_binary(conv2, 64, 64 * 9, "conv2");
    check_bn(bn7, 64, "bn7");
    check_binary(fc1, 500, 7 * 7 * 64, "fc1");
    check_bn(bn10, 500, "bn10");
    check_binary(fc2, 10, 500, "fc2");
    check_bn(bn13, 10, "bn13");
}

IntGrid conv2d_first_layer(const Image &image, const BinaryKernel3x3 &kernel) {
    IntGrid out{};
    for (int y = 0; y < kSide; ++y)
        for (int x = 0; x < kSide; ++x) {
            int32_t acc = 0;
            for (int a = 0; a < 3; ++a) {
                const int yy = y + a - 1;
                if (yy < 0 || yy >= kSide)
                    continue;
                for (int b = 0; b < 3; ++b) {
                    const int xx = x + b - 1;
                    if (xx >= 0 && xx < kSide)
                        acc += kernel[a * 3 + b] * int32_t(image.at(yy, xx));
                }
            }
            out[y * kSide + x] = acc;
        }
    return out;
}

FeatureMap conv2d_first_layer(const Image &image, const BinaryMatrix &kernels) {
    if (kernels.cols != 9)
        throw Error(Errc::shape_mismatch, "first layer expects one input map");
    FeatureMap out(kSide, kSide, kernels.rows, FeatureMap::Kind::integer);
    for (int k = 0; k < kernels.rows; ++k) {
        const IntGrid o = conv2d_first_layer(image, kernels.kernel(k, 0));
        for (int i = 0; i < kPixels; ++i)
            out.data[size_t(i) * out.c + k] = o[i];
    }
    return out;
}

FeatureMap conv2d_binary_layer(const FeatureMap &in, const BinaryMatrix &kernels) {
    if (in.kind != FeatureMap::Kind::binary)
        throw Error(Errc::precondition, "binary convolution needs a binary input");
    if (kernels.cols != in.c * 9)
        throw Error(Errc::shape_mismatch, "kernel input depth does not match input map");
    FeatureMap out(in.h, in.w, kernels.rows, FeatureMap::Kind::integer);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x)
            for (int o = 0; o < kernels.rows; ++o) {
                int32_t acc = 0;
                const int8_t *wrow = kernels.w.data() + size_t(o) * kernels.cols;
                for (int a = 0; a < 3; ++a) {
                    const int yy = y + a - 1;
                    if (yy < 0 || yy >= in.h)
                        continue;
                    for (int b = 0; b < 3; ++b) {
                        const int xx = x + b - 1;
                        if (xx < 0 || xx >= in.w)
                            continue;
                        const int32_t *px = &in.data[(size_t(yy) * in.w + xx) * in.c];
                        for (int i = 0; i < in.c; ++i)
                            acc += wrow[i * 9 + a * 3 + b] * px[i];
                    }
                }
                out.at(y, x, o) = acc;
            }
    return out;
}

FeatureMap max_pool_2x2(const FeatureMap &in) {
    if (in.h % 2 || in.w % 2)
        throw Error(Errc::odd_dimension, "max pooling needs even height and width");
    FeatureMap out(in.h / 2, in.w / 2, in.c, in.kind);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int ch = 0; ch < in.c; ++ch)
                out.at(y, x, ch) = std::max({in.at(2 * y, 2 * x, ch), in.at(2 * y, 2 * x + 1, ch),
                                             in.at(2 * y + 1, 2 * x, ch),
                                             in.at(2 * y + 1, 2 * x + 1, ch)});
    return out;
}

int32_t batch_norm_value(int32_t in, int32_t scale_q16, int32_t shift_q8) {
    // Everything in units of 2^-16, then round half up to 2^-8.
    const int64_t num = int64_t(scale_q16) * in + int64_t(shift_q8) * 256 + 128;
    int64_t q = num >= 0 ? num / 256 : -((-num + 255) / 256);
    return int32_t(std::clamp<int64_t>(q, -kFixedOne, kFixedOne));
}

FeatureMap batch_norm(const FeatureMap &in, const BatchNormParams &p) {
    if (p.scale_q16.size() != size_t(in.c) || p.shift_q8.size() != size_t(in.c))
        throw Error(Errc::shape_mismatch, "batch norm channel count mismatch");
    FeatureMap out(in.h, in.w, in.c, FeatureMap::Kind::fixed);
    for (size_t i = 0; i < in.data.size(); ++i) {
        const size_t ch = i % size_t(in.c);
        out.data[i] = batch_norm_value(in.data[i], p.scale_q16[ch], p.shift_q8[ch]);
    }
    return out;
}

FeatureMap sign_nonlinearity(const FeatureMap &in) {
    FeatureMap out(in.h, in.w, in.c, FeatureMap::Kind::binary);
    for (size_t i = 0; i < in.data.size(); ++i)
        out.data[i] = in.data[i] >= 0 ? 1 : -1;
    return out;
}

std::vector<int32_t> fully_connected(const std::vector<int32_t> &in,
                                     const BinaryMatrix &weights) {
    if (in.size() != size_t(weights.cols))
        throw Error(Errc::shape_mismatch, "fully connected input length mismatch");
    std::vector<int32_t> out(weights.rows, 0);
    for (int r = 0; r < weights.rows; ++r) {
        const int8_t *row = weights.w.data() + size_t(r) * weights.cols;
        int32_t acc = 0;
        for (int c = 0; c < weights.cols; ++c)
            acc += row[c] * in[c];
        out[r] = acc;
    }
    return out;
}

namespace {

FeatureMap as_vector_map(const std::vector<int32_t> &v, FeatureMap::Kind k) {
    FeatureMap m(1, 1, int(v.size()), k);
    m.data = v;
    return m;
}

} // namespace

Inference infer(const BnnModel &model, const Image &image) {
    model.validate();
    FeatureMap a = conv2d_first_layer(image, model.conv1);    // 1
    a = sign_nonlinearity(batch_norm(max_pool_2x2(a), model.bn3)); // 2-4
    a = conv2d_binary_layer(a, model.conv2);                  // 5
    a = sign_nonlinearity(batch_norm(max_pool_2x2(a), model.bn7)); // 6-8
    std::vector<int32_t> v = fully_connected(a.data, model.fc1); // 9
    FeatureMap b = sign_nonlinearity(batch_norm(as_vector_map(v, FeatureMap::Kind::integer),
                                                model.bn10)); // 10-11
    v = fully_connected(b.data, model.fc2);                   // 12
    b = batch_norm(as_vector_map(v, FeatureMap::Kind::integer), model.bn13); // 13
    Inference r;
    std::copy(b.data.begin(), b.data.end(), r.scores.begin());
    r.predicted = int(std::max_element(r.scores.begin(), r.scores.end()) - r.scores.begin());
    return r;
}

namespace {

BinaryMatrix random_binary(Rng &rng, int rows, int cols) {
    BinaryMatrix m{rows, cols, std::vector<int8_t>(size_t(rows) * cols)};
    for (auto &v : m.w)
        v = (rng.next() >> 63) ? 1 : -1;
    return m;
}

BatchNormParams random_bn(Rng &rng, int ch, double range) {
    BatchNormParams p;
    for (int i = 0; i < ch; ++i) {
        const double scale = (1.0 + 3.0 * rng.uniform()) / range;
        p.scale_q16.push_back(std::max<int32_t>(1, int32_t(scale * 65536.0 + 0.5)));
        p.shift_q8.push_back(int32_t(rng.next() % 129) - 64);
    }
    return p;
}

} // namespace

BnnModel generate_random_model(uint64_t seed) {
    Rng rng(seed);
    BnnModel m;
    m.conv1 = random_binary(rng, 64, 9);
    m.bn3 = random_bn(rng, 64, 9 * 255);
    m.conv2 = random_binary(rng, 64, 64 * 9);
    m.bn7 = random_bn(rng, 64, 9 * 64);
    m.fc1 = random_binary(rng, 500, 7 * 7 * 64);
    m.bn10 = random_bn(rng, 500, 7 * 7 * 64);
    m.fc2 = random_binary(rng, 10, 500);
    m.bn13 = random_bn(rng, 10, 500);
    return m;
}

// Container: "BNNM", u32 version, u32 layer count, then per layer
// u32 kind, u32 encoding, u32 rows, u32 cols, u64 payload size, payload.
// All integers little endian.
namespace {

constexpr char kModelMagic[4] = {'B', 'N', 'N', 'M'};
constexpr uint32_t kModelVersion = 1;
enum : uint32_t { kLayerConv = 1, kLayerBatchNorm = 2, kLayerFc = 3 };
enum : uint32_t { kEncBitplane = 1, kEncInt8 = 2, kEncInt32Pairs = 3 };

void put_u32(std::string &o, uint32_t v) {
    for (int s = 0; s < 32; s += 8)
        o.push_back(char((v >> s) & 0xff));
}
void put_u64(std::string &o, uint64_t v) {
    for (int s = 0; s < 64; s += 8)
        o.push_back(char((v >> s) & 0xff));
}

struct Reader {
    const std::string &b;
    size_t pos = 0;
    const uint8_t *take(size_t n) {
        if (pos + n > b.size() || pos + n < pos)
            throw Error(Errc::parse_failure, "model file truncated");
        const uint8_t *p = reinterpret_cast<const uint8_t *>(b.data()) + pos;
        pos += n;
        return p;
    }
    uint32_t u32() {
        const uint8_t *p = take(4);
        return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
    }
    uint64_t u64() {
        const uint64_t lo = u32();
        return lo | uint64_t(u32()) << 32;
    }
};

void put_binary(std::string &o, uint32_t kind, const BinaryMatrix &m) {
    const size_t n = m.w.size();
    std::string bits((n + 7) / 8, '\0');
    for (size_t e = 0; e < n; ++e)
        if (m.w[e] == 1)
            bits[e / 8] = char(uint8_t(bits[e / 8]) | (1u << (e % 8)));
    put_u32(o, kind);
    put_u32(o, kEncBitplane);
    put_u32(o, uint32_t(m.rows));
    put_u32(o, uint32_t(m.cols));
    put_u64(o, bits.size());
    o += bits;
}

void put_bn(std::string &o, const BatchNormParams &p) {
    put_u32(o, kLayerBatchNorm);
    put_u32(o, kEncInt32Pairs);
    put_u32(o, uint32_t(p.scale_q16.size()));
    put_u32(o, 2);
    put_u64(o, p.scale_q16.size() * 8);
    for (size_t i = 0; i < p.scale_q16.size(); ++i) {
        put_u32(o, uint32_t(p.scale_q16[i]));
        put_u32(o, uint32_t(p.shift_q8[i]));
    }
}

BinaryMatrix get_binary(Reader &r, uint32_t kind, int rows, int cols) {
    if (r.u32() != kind)
        throw Error(Errc::parse_failure, "unexpected layer kind");
    const uint32_t enc = r.u32();
    if (r.u32() != uint32_t(rows) || r.u32() != uint32_t(cols))
        throw Error(Errc::parse_failure, "unexpected layer shape");
    const uint64_t size = r.u64();
    const size_t n = size_t(rows) * cols;
    BinaryMatrix m{rows, cols, std::vector<int8_t>(n)};
    if (enc == kEncBitplane) {
        if (size != (n + 7) / 8)
            throw Error(Errc::parse_failure, "bitplane size mismatch");
        const uint8_t *p = r.take(size);
        for (size_t e = 0; e < n; ++e)
            m.w[e] = (p[e / 8] >> (e % 8)) & 1 ? 1 : -1;
        if (n % 8 && (p[n / 8] >> (n % 8)) != 0)
            throw Error(Errc::parse_failure, "nonzero bitplane padding");
    } else if (enc == kEncInt8) {
        if (size != n)
            throw Error(Errc::parse_failure, "int8 weight size mismatch");
        const uint8_t *p = r.take(size);
        for (size_t e = 0; e < n; ++e) {
            const int8_t v = int8_t(p[e]);
            if (v != 1 && v != -1)
                throw Error(Errc::parse_failure,
                            "weight value " + std::to_string(v) + " is not +/-1");
            m.w[e] = v;
        }
    } else {
        throw Error(Errc::parse_failure, "unknown weight encoding");
    }
    return m;
}

BatchNormParams get_bn(Reader &r, int ch) {
    if (r.u32() != kLayerBatchNorm || r.u32() != kEncInt32Pairs)
        throw Error(Errc::parse_failure, "expected batch norm layer");
    if (r.u32() != uint32_t(ch) || r.u32() != 2 || r.u64() != uint64_t(ch) * 8)
        throw Error(Errc::parse_failure, "unexpected batch norm shape");
    BatchNormParams p;
    for (int i = 0; i < ch; ++i) {
        p.scale_q16.push_back(int32_t(r.u32()));
        p.shift_q8.push_back(int32_t(r.u32()));
    }
    return p;
}

} // namespace

std::string encode_model(const BnnModel &m) {
    m.validate();
    std::string o(kModelMagic, 4);
    put_u32(o, kModelVersion);
    put_u32(o, 8);
    put_binary(o, kLayerConv, m.conv1);
    put_bn(o, m.bn3);
    put_binary(o, kLayerConv, m.conv2);
    put_bn(o, m.bn7);
    put_binary(o, kLayerFc, m.fc1);
    put_bn(o, m.bn10);
    put_binary(o, kLayerFc, m.fc2);
    put_bn(o, m.bn13);
    return o;
}

BnnModel decode_model(const std::string &bytes) {
    Reader r{bytes};
    if (std::memcmp(r.take(4), kModelMagic, 4) != 0)
        throw Error(Errc::parse_failure, "bad model magic");
    if (r.u32() != kModelVersion)
        throw Error(Errc::parse_failure, "unsupported model version");
    if (r.u32() != 8)
        throw Error(Errc::parse_failure, "expected 8 parameter layers");
    BnnModel m;
    m.conv1 = get_binary(r, kLayerConv, 64, 9);
    m.bn3 = get_bn(r, 64);
    m.conv2 = get_binary(r, kLayerConv, 64, 64 * 9);
    m.bn7 = get_bn(r, 64);
    m.fc1 = get_binary(r, kLayerFc, 500, 7 * 7 * 64);
    m.bn10 = get_bn(r, 500);
    m.fc2 = get_binary(r, kLayerFc, 10, 500);
    m.bn13 = get_bn(r, 10);
    if (r.pos != bytes.size())
        throw Error(Errc::parse_failure, "trailing bytes after model");
    return m;
}

void save_model(const BnnModel &model, const std::string &path) {
    write_file_atomic(path, encode_model(model));
}

BnnModel load_model(const std::string &path) {
    return decode_model(read_file(path));
}

} // namespace bnnleak
