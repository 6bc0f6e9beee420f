#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sedm/error.hpp"

namespace sedm {

enum class PadMode { circular, zero };

/// Dense CHW tensor.
template <typename T>
struct Tensor {
    std::size_t c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(std::size_t c_, std::size_t h_, std::size_t w_) : c(c_), h(h_), w(w_), data(c_ * h_ * w_, T(0)) {}

    std::size_t size() const { return data.size(); }
    T& at(std::size_t ci, std::size_t y, std::size_t x) { return data[(ci * h + y) * w + x]; }
    T at(std::size_t ci, std::size_t y, std::size_t x) const { return data[(ci * h + y) * w + x]; }
};

template <typename T>
Tensor<T> mirror_both(const Tensor<T>& t) {
    Tensor<T> out(t.c, t.h, t.w);
    for (std::size_t c = 0; c < t.c; ++c)
        for (std::size_t y = 0; y < t.h; ++y)
            for (std::size_t x = 0; x < t.w; ++x) out.at(c, y, x) = t.at(c, t.h - 1 - y, t.w - 1 - x);
    return out;
}

namespace nn {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

/// Fan-in-scaled uniform initialization, biases zero.
template <typename T>
void init_uniform(std::vector<T>& w, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w) v = static_cast<T>(dist(rng));
}

template <typename T>
struct ConvCache {
    std::vector<T> cols; // (in_ch*9) x (out_h*out_w)
    std::size_t out_h = 0, out_w = 0;
    std::size_t in_h = 0, in_w = 0;
};

/// 3x3 convolution with padding 1 (circular or zero) and stride 1 or 2.
/// Implemented as im2col + GEMM.
template <typename T>
struct Conv2d {
    std::size_t in_ch = 0, out_ch = 0, stride = 1;
    PadMode pad = PadMode::circular;
    std::vector<T> w, b;   // w: [out_ch][in_ch][3][3]
    std::vector<T> gw, gb; // gradient accumulators

    void init(std::size_t in, std::size_t out, std::size_t stride_, PadMode pad_, std::mt19937_64& rng) {
        in_ch = in;
        out_ch = out;
        stride = stride_;
        pad = pad_;
        w.assign(out * in * 9, T(0));
        b.assign(out, T(0));
        init_uniform(w, in * 9, rng);
        gw.assign(w.size(), T(0));
        gb.assign(b.size(), T(0));
    }

    void im2col(const Tensor<T>& x, ConvCache<T>& cache) const {
        const std::size_t h = x.h, wd = x.w;
        const std::size_t oh = h / stride, ow = wd / stride;
        cache.out_h = oh;
        cache.out_w = ow;
        cache.in_h = h;
        cache.in_w = wd;
        const std::size_t patch = in_ch * 9, cols = oh * ow;
        cache.cols.assign(patch * cols, T(0));
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    T* dst = cache.cols.data() + (ci * 9 + ky * 3 + kx) * cols;
                    for (std::size_t oy = 0; oy < oh; ++oy) {
                        const long sy = static_cast<long>(oy * stride + ky) - 1;
                        long ry = sy;
                        if (pad == PadMode::circular) ry = (sy + static_cast<long>(h)) % static_cast<long>(h);
                        else if (sy < 0 || sy >= static_cast<long>(h)) continue; // zeros already in place
                        const T* src_row = x.data.data() + (ci * h + static_cast<std::size_t>(ry)) * wd;
                        for (std::size_t ox = 0; ox < ow; ++ox) {
                            const long sx = static_cast<long>(ox * stride + kx) - 1;
                            long rx = sx;
                            if (pad == PadMode::circular) rx = (sx + static_cast<long>(wd)) % static_cast<long>(wd);
                            else if (sx < 0 || sx >= static_cast<long>(wd)) continue;
                            dst[oy * ow + ox] = src_row[static_cast<std::size_t>(rx)];
                        }
                    }
                }
            }
        }
    }

    Tensor<T> forward(const Tensor<T>& x, ConvCache<T>& cache) const {
        if (x.c != in_ch) throw ShapeError("conv input channel mismatch");
        if (x.h % stride != 0 || x.w % stride != 0) throw ShapeError("conv input not divisible by stride");
        im2col(x, cache);
        const std::size_t patch = in_ch * 9, cols = cache.out_h * cache.out_w;
        Tensor<T> y(out_ch, cache.out_h, cache.out_w);
        ConstMatMap<T> wm(w.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(patch));
        ConstMatMap<T> cm(cache.cols.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(cols));
        MatMap<T> ym(y.data.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(cols));
        ym.noalias() = wm * cm;
        for (std::size_t oc = 0; oc < out_ch; ++oc) {
            T* row = y.data.data() + oc * cols;
            for (std::size_t p = 0; p < cols; ++p) row[p] += b[oc];
        }
        return y;
    }

    /// Accumulates gw/gb and returns the gradient w.r.t. the input.
    Tensor<T> backward(const Tensor<T>& dy, const ConvCache<T>& cache) {
        const std::size_t patch = in_ch * 9, cols = cache.out_h * cache.out_w;
        ConstMatMap<T> dym(dy.data.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(cols));
        ConstMatMap<T> cm(cache.cols.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(cols));
        MatMap<T> gwm(gw.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(patch));
        gwm.noalias() += dym * cm.transpose();
        for (std::size_t oc = 0; oc < out_ch; ++oc) {
            T acc = T(0);
            const T* row = dy.data.data() + oc * cols;
            for (std::size_t p = 0; p < cols; ++p) acc += row[p];
            gb[oc] += acc;
        }

        // dcol = W^T * dy, then scatter back (col2im).
        std::vector<T> dcol(patch * cols);
        ConstMatMap<T> wm(w.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(patch));
        MatMap<T> dcm(dcol.data(), static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(cols));
        dcm.noalias() = wm.transpose() * dym;

        Tensor<T> dx(in_ch, cache.in_h, cache.in_w);
        const std::size_t h = cache.in_h, wd = cache.in_w;
        for (std::size_t ci = 0; ci < in_ch; ++ci) {
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const T* src = dcol.data() + (ci * 9 + ky * 3 + kx) * cols;
                    for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
                        const long sy = static_cast<long>(oy * stride + ky) - 1;
                        long ry = sy;
                        if (pad == PadMode::circular) ry = (sy + static_cast<long>(h)) % static_cast<long>(h);
                        else if (sy < 0 || sy >= static_cast<long>(h)) continue;
                        T* dst_row = dx.data.data() + (ci * h + static_cast<std::size_t>(ry)) * wd;
                        for (std::size_t ox = 0; ox < cache.out_w; ++ox) {
                            const long sx = static_cast<long>(ox * stride + kx) - 1;
                            long rx = sx;
                            if (pad == PadMode::circular) rx = (sx + static_cast<long>(wd)) % static_cast<long>(wd);
                            else if (sx < 0 || sx >= static_cast<long>(wd)) continue;
                            dst_row[static_cast<std::size_t>(rx)] += src[oy * cache.out_w + ox];
                        }
                    }
                }
            }
        }
        return dx;
    }
};

/// Leaky rectifier, slope 0.01.
template <typename T>
struct LeakyRelu {
    static constexpr double slope = 0.01;

    static Tensor<T> forward(const Tensor<T>& x, std::vector<std::uint8_t>& mask) {
        mask.resize(x.size());
        Tensor<T> y = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool pos = x.data[i] > T(0);
            mask[i] = pos;
            if (!pos) y.data[i] = static_cast<T>(slope) * x.data[i];
        }
        return y;
    }

    static Tensor<T> backward(const Tensor<T>& dy, const std::vector<std::uint8_t>& mask) {
        Tensor<T> dx = dy;
        for (std::size_t i = 0; i < dy.size(); ++i)
            if (!mask[i]) dx.data[i] *= static_cast<T>(slope);
        return dx;
    }

    static void forward_vec(std::vector<T>& x, std::vector<std::uint8_t>& mask) {
        mask.resize(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const bool pos = x[i] > T(0);
            mask[i] = pos;
            if (!pos) x[i] *= static_cast<T>(slope);
        }
    }
};

template <typename T>
struct Linear {
    std::size_t in_dim = 0, out_dim = 0;
    std::vector<T> w, b;   // w: [out][in]
    std::vector<T> gw, gb;

    void init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
        in_dim = in;
        out_dim = out;
        w.assign(out * in, T(0));
        b.assign(out, T(0));
        init_uniform(w, in, rng);
        gw.assign(w.size(), T(0));
        gb.assign(b.size(), T(0));
    }

    std::vector<T> forward(const std::vector<T>& x) const {
        if (x.size() != in_dim) throw ShapeError("linear input size mismatch");
        std::vector<T> y(out_dim);
        for (std::size_t o = 0; o < out_dim; ++o) {
            T acc = b[o];
            const T* row = w.data() + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
        return y;
    }

    std::vector<T> backward(const std::vector<T>& dy, const std::vector<T>& x_cached) {
        std::vector<T> dx(in_dim, T(0));
        for (std::size_t o = 0; o < out_dim; ++o) {
            const T g = dy[o];
            gb[o] += g;
            T* grow = gw.data() + o * in_dim;
            const T* row = w.data() + o * in_dim;
            for (std::size_t i = 0; i < in_dim; ++i) {
                grow[i] += g * x_cached[i];
                dx[i] += row[i] * g;
            }
        }
        return dx;
    }
};

/// Mean over spatial positions, one value per channel.
template <typename T>
std::vector<T> global_avg_pool(const Tensor<T>& x) {
    std::vector<T> y(x.c);
    const std::size_t hw = x.h * x.w;
    for (std::size_t c = 0; c < x.c; ++c) {
        T acc = T(0);
        const T* p = x.data.data() + c * hw;
        for (std::size_t i = 0; i < hw; ++i) acc += p[i];
        y[c] = acc / static_cast<T>(hw);
    }
    return y;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const std::vector<T>& dy, std::size_t c, std::size_t h, std::size_t w) {
    Tensor<T> dx(c, h, w);
    const T scale = T(1) / static_cast<T>(h * w);
    for (std::size_t ci = 0; ci < c; ++ci) {
        const T g = dy[ci] * scale;
        T* p = dx.data.data() + ci * h * w;
        for (std::size_t i = 0; i < h * w; ++i) p[i] = g;
    }
    return dx;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
    Tensor<T> y(x.c, x.h * 2, x.w * 2);
    for (std::size_t c = 0; c < x.c; ++c)
        for (std::size_t i = 0; i < y.h; ++i)
            for (std::size_t j = 0; j < y.w; ++j) y.at(c, i, j) = x.at(c, i / 2, j / 2);
    return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& dy) {
    Tensor<T> dx(dy.c, dy.h / 2, dy.w / 2);
    for (std::size_t c = 0; c < dy.c; ++c)
        for (std::size_t i = 0; i < dy.h; ++i)
            for (std::size_t j = 0; j < dy.w; ++j) dx.at(c, i / 2, j / 2) += dy.at(c, i, j);
    return dx;
}

/// 2x2 mean pooling, used by the optional residual skip.
template <typename T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
    Tensor<T> y(x.c, x.h / 2, x.w / 2);
    for (std::size_t c = 0; c < x.c; ++c)
        for (std::size_t i = 0; i < y.h; ++i)
            for (std::size_t j = 0; j < y.w; ++j)
                y.at(c, i, j) = static_cast<T>(0.25) * (x.at(c, 2 * i, 2 * j) + x.at(c, 2 * i + 1, 2 * j) +
                                                        x.at(c, 2 * i, 2 * j + 1) + x.at(c, 2 * i + 1, 2 * j + 1));
    return y;
}

template <typename T>
Tensor<T> avgpool2x_backward(const Tensor<T>& dy, std::size_t in_h, std::size_t in_w) {
    Tensor<T> dx(dy.c, in_h, in_w);
    for (std::size_t c = 0; c < dy.c; ++c)
        for (std::size_t i = 0; i < dy.h; ++i)
            for (std::size_t j = 0; j < dy.w; ++j) {
                const T g = static_cast<T>(0.25) * dy.at(c, i, j);
                dx.at(c, 2 * i, 2 * j) += g;
                dx.at(c, 2 * i + 1, 2 * j) += g;
                dx.at(c, 2 * i, 2 * j + 1) += g;
                dx.at(c, 2 * i + 1, 2 * j + 1) += g;
            }
    return dx;
}

} // namespace nn
} // namespace sedm
