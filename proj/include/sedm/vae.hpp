#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sedm/distmat.hpp"
#include "sedm/error.hpp"
#include "sedm/nn.hpp"

namespace sedm {

struct ModelConfig {
    std::size_t matrix_size = 64;
    std::size_t latent_dim = 128;
    std::size_t blocks = 4;
    std::size_t base_channels = 8;
    std::uint64_t seed = 0;
    PadMode padding = PadMode::circular;
    bool mirror_sum = true;   // process input and its double mirror, sum pooled features
    bool residual = false;    // mean-pool skip connections in the encoder stages

    void validate() const {
        if (!is_power_of_two(matrix_size)) throw ConfigError("matrix_size must be a power of two");
        if (blocks < 1) throw ConfigError("blocks must be >= 1");
        if ((matrix_size >> blocks) < 2) throw ConfigError("matrix_size / 2^blocks must be >= 2");
        if (latent_dim < 2) throw ConfigError("latent_dim must be >= 2");
        if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
    }

    std::size_t bottleneck_side() const { return matrix_size >> blocks; }
    std::size_t final_channels() const { return base_channels << blocks; }
};

inline constexpr double kLogvarMin = -30.0;
inline constexpr double kLogvarMax = 20.0;

/// Encoder backbone: stem conv, then `blocks` stages of
/// [conv 3x3, leaky relu, conv 3x3 stride 2, leaky relu] with channel
/// doubling, ending in global average pooling. The pooled features of the
/// input and of its double-mirrored copy are summed, which makes the encoder
/// exactly reflection invariant. Decoder: dense layer to the bottleneck grid,
/// then [nearest 2x upsample, conv 3x3, leaky relu] stages and a final linear
/// 1-channel conv.
template <typename T>
struct VaeModel {
    ModelConfig config;

    nn::Conv2d<T> stem;
    struct EncStage {
        nn::Conv2d<T> a; // stride 1, doubles channels
        nn::Conv2d<T> b; // stride 2
    };
    std::vector<EncStage> enc;
    nn::Linear<T> head_mu, head_logvar;

    nn::Linear<T> dec_fc;
    std::vector<nn::Conv2d<T>> dec; // stride 1, halves channels
    nn::Conv2d<T> dec_final;

    template <typename F>
    void for_each_tensor(F&& fn) {
        fn("stem.w", std::vector<std::size_t>{stem.out_ch, stem.in_ch, 3, 3}, stem.w);
        fn("stem.b", std::vector<std::size_t>{stem.out_ch}, stem.b);
        for (std::size_t i = 0; i < enc.size(); ++i) {
            const std::string p = "enc" + std::to_string(i);
            fn(p + ".a.w", std::vector<std::size_t>{enc[i].a.out_ch, enc[i].a.in_ch, 3, 3}, enc[i].a.w);
            fn(p + ".a.b", std::vector<std::size_t>{enc[i].a.out_ch}, enc[i].a.b);
            fn(p + ".b.w", std::vector<std::size_t>{enc[i].b.out_ch, enc[i].b.in_ch, 3, 3}, enc[i].b.w);
            fn(p + ".b.b", std::vector<std::size_t>{enc[i].b.out_ch}, enc[i].b.b);
        }
        fn("head_mu.w", std::vector<std::size_t>{head_mu.out_dim, head_mu.in_dim}, head_mu.w);
        fn("head_mu.b", std::vector<std::size_t>{head_mu.out_dim}, head_mu.b);
        fn("head_logvar.w", std::vector<std::size_t>{head_logvar.out_dim, head_logvar.in_dim}, head_logvar.w);
        fn("head_logvar.b", std::vector<std::size_t>{head_logvar.out_dim}, head_logvar.b);
        fn("dec_fc.w", std::vector<std::size_t>{dec_fc.out_dim, dec_fc.in_dim}, dec_fc.w);
        fn("dec_fc.b", std::vector<std::size_t>{dec_fc.out_dim}, dec_fc.b);
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const std::string p = "dec" + std::to_string(i);
            fn(p + ".w", std::vector<std::size_t>{dec[i].out_ch, dec[i].in_ch, 3, 3}, dec[i].w);
            fn(p + ".b", std::vector<std::size_t>{dec[i].out_ch}, dec[i].b);
        }
        fn("dec_final.w", std::vector<std::size_t>{dec_final.out_ch, dec_final.in_ch, 3, 3}, dec_final.w);
        fn("dec_final.b", std::vector<std::size_t>{dec_final.out_ch}, dec_final.b);
    }

    template <typename F>
    void for_each_grad(F&& fn) {
        fn(stem.gw);
        fn(stem.gb);
        for (auto& s : enc) {
            fn(s.a.gw);
            fn(s.a.gb);
            fn(s.b.gw);
            fn(s.b.gb);
        }
        fn(head_mu.gw);
        fn(head_mu.gb);
        fn(head_logvar.gw);
        fn(head_logvar.gb);
        fn(dec_fc.gw);
        fn(dec_fc.gb);
        for (auto& c : dec) {
            fn(c.gw);
            fn(c.gb);
        }
        fn(dec_final.gw);
        fn(dec_final.gb);
    }

    void zero_grad() {
        for_each_grad([](auto& g) { std::fill(g.begin(), g.end(), T(0)); });
    }
};

/// Deterministic per seed: fan-in-scaled uniform weights, zero biases.
template <typename T = float>
VaeModel<T> init_model(const ModelConfig& config) {
    config.validate();
    VaeModel<T> m;
    m.config = config;
    std::mt19937_64 rng(config.seed);

    m.stem.init(1, config.base_channels, 1, config.padding, rng);
    std::size_t ch = config.base_channels;
    for (std::size_t i = 0; i < config.blocks; ++i) {
        typename VaeModel<T>::EncStage s;
        s.a.init(ch, ch * 2, 1, config.padding, rng);
        s.b.init(ch * 2, ch * 2, 2, config.padding, rng);
        m.enc.push_back(std::move(s));
        ch *= 2;
    }
    m.head_mu.init(ch, config.latent_dim, rng);
    m.head_logvar.init(ch, config.latent_dim, rng);

    const std::size_t b = config.bottleneck_side();
    m.dec_fc.init(config.latent_dim, ch * b * b, rng);
    for (std::size_t i = 0; i < config.blocks; ++i) {
        nn::Conv2d<T> c;
        c.init(ch, ch / 2, 1, config.padding, rng);
        m.dec.push_back(std::move(c));
        ch /= 2;
    }
    m.dec_final.init(ch, 1, 1, config.padding, rng);
    return m;
}

// ---------------------------------------------------------------------------
// Forward/backward plumbing. Context structs hold everything the backward
// pass needs; forward passes do not mutate the model.
// ---------------------------------------------------------------------------

template <typename T>
struct EncoderBranchCtx {
    nn::ConvCache<T> stem_cache;
    std::vector<std::uint8_t> stem_mask;
    struct Stage {
        nn::ConvCache<T> ca;
        std::vector<std::uint8_t> ma;
        nn::ConvCache<T> cb;
        std::vector<std::uint8_t> mb;
        std::size_t t_c = 0, t_h = 0, t_w = 0; // activation shape before stride-2 conv
    };
    std::vector<Stage> stages;
    std::size_t out_c = 0, out_h = 0, out_w = 0;
};

template <typename T>
struct EncodeCtx {
    EncoderBranchCtx<T> main, mirrored;
    std::vector<T> feat;      // summed pooled features (head input)
    std::vector<T> raw_logvar;
};

template <typename T>
struct DecodeCtx {
    std::vector<T> z;
    std::vector<std::uint8_t> fc_mask;
    struct Stage {
        std::size_t in_h = 0, in_w = 0;
        nn::ConvCache<T> cache;
        std::vector<std::uint8_t> mask;
    };
    std::vector<Stage> stages;
    nn::ConvCache<T> final_cache;
};

namespace detail {

template <typename T>
std::vector<T> encoder_branch_forward(const VaeModel<T>& m, const Tensor<T>& x, EncoderBranchCtx<T>& ctx) {
    Tensor<T> t = m.stem.forward(x, ctx.stem_cache);
    t = nn::LeakyRelu<T>::forward(t, ctx.stem_mask);
    ctx.stages.resize(m.enc.size());
    for (std::size_t i = 0; i < m.enc.size(); ++i) {
        auto& sc = ctx.stages[i];
        t = m.enc[i].a.forward(t, sc.ca);
        t = nn::LeakyRelu<T>::forward(t, sc.ma);
        sc.t_c = t.c;
        sc.t_h = t.h;
        sc.t_w = t.w;
        Tensor<T> u = m.enc[i].b.forward(t, sc.cb);
        if (m.config.residual) {
            const Tensor<T> skip = nn::avgpool2x(t);
            for (std::size_t k = 0; k < u.size(); ++k) u.data[k] += skip.data[k];
        }
        t = nn::LeakyRelu<T>::forward(u, sc.mb);
    }
    ctx.out_c = t.c;
    ctx.out_h = t.h;
    ctx.out_w = t.w;
    return nn::global_avg_pool(t);
}

template <typename T>
void encoder_branch_backward(VaeModel<T>& m, const std::vector<T>& dfeat, const EncoderBranchCtx<T>& ctx) {
    Tensor<T> dt = nn::global_avg_pool_backward(dfeat, ctx.out_c, ctx.out_h, ctx.out_w);
    for (std::size_t i = m.enc.size(); i-- > 0;) {
        const auto& sc = ctx.stages[i];
        Tensor<T> du = nn::LeakyRelu<T>::backward(dt, sc.mb);
        Tensor<T> dta = m.enc[i].b.backward(du, sc.cb);
        if (m.config.residual) {
            const Tensor<T> dskip = nn::avgpool2x_backward(du, sc.t_h, sc.t_w);
            for (std::size_t k = 0; k < dta.size(); ++k) dta.data[k] += dskip.data[k];
        }
        dta = nn::LeakyRelu<T>::backward(dta, sc.ma);
        dt = m.enc[i].a.backward(dta, sc.ca);
    }
    dt = nn::LeakyRelu<T>::backward(dt, ctx.stem_mask);
    m.stem.backward(dt, ctx.stem_cache); // input gradient discarded
}

} // namespace detail

/// Encoder forward. Returns posterior parameters; logvar is clamped to
/// [-30, 20]. The context enables a subsequent backward pass.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> encode(const VaeModel<T>& m, const Tensor<T>& x, EncodeCtx<T>& ctx) {
    if (x.c != 1 || x.h != m.config.matrix_size || x.w != m.config.matrix_size)
        throw ShapeError("encoder input must be 1 x N x N with N = config.matrix_size");
    std::vector<T> feat = detail::encoder_branch_forward(m, x, ctx.main);
    if (m.config.mirror_sum) {
        const Tensor<T> xm = mirror_both(x);
        const std::vector<T> feat2 = detail::encoder_branch_forward(m, xm, ctx.mirrored);
        for (std::size_t i = 0; i < feat.size(); ++i) feat[i] += feat2[i];
    }
    ctx.feat = feat;
    std::vector<T> mu = m.head_mu.forward(feat);
    std::vector<T> lv = m.head_logvar.forward(feat);
    ctx.raw_logvar = lv;
    for (auto& v : lv) v = std::min(std::max(v, static_cast<T>(kLogvarMin)), static_cast<T>(kLogvarMax));
    return {std::move(mu), std::move(lv)};
}

/// Convenience overload when no backward pass is needed.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> encode(const VaeModel<T>& m, const Tensor<T>& x) {
    EncodeCtx<T> ctx;
    return encode(m, x, ctx);
}

template <typename T>
void encode_backward(VaeModel<T>& m, const std::vector<T>& dmu, const std::vector<T>& dlogvar,
                     const EncodeCtx<T>& ctx) {
    std::vector<T> dlv = dlogvar;
    for (std::size_t i = 0; i < dlv.size(); ++i) {
        const T raw = ctx.raw_logvar[i];
        if (raw < static_cast<T>(kLogvarMin) || raw > static_cast<T>(kLogvarMax)) dlv[i] = T(0);
    }
    std::vector<T> dfeat = m.head_mu.backward(dmu, ctx.feat);
    const std::vector<T> dfeat2 = m.head_logvar.backward(dlv, ctx.feat);
    for (std::size_t i = 0; i < dfeat.size(); ++i) dfeat[i] += dfeat2[i];
    detail::encoder_branch_backward(m, dfeat, ctx.main);
    if (m.config.mirror_sum) detail::encoder_branch_backward(m, dfeat, ctx.mirrored);
}

/// z = mu + exp(logvar / 2) * eps.
template <typename T>
std::vector<T> reparameterize(const std::vector<T>& mu, const std::vector<T>& logvar, const std::vector<T>& eps) {
    if (mu.size() != logvar.size() || mu.size() != eps.size()) throw ShapeError("reparameterize size mismatch");
    std::vector<T> z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i) z[i] = mu[i] + std::exp(logvar[i] / T(2)) * eps[i];
    return z;
}

template <typename T>
std::vector<T> standard_normal_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<T> out(n);
    for (auto& v : out) v = static_cast<T>(gauss(rng));
    return out;
}

template <typename T>
Tensor<T> decode(const VaeModel<T>& m, const std::vector<T>& z, DecodeCtx<T>& ctx) {
    if (z.size() != m.config.latent_dim) throw ShapeError("latent vector size mismatch");
    ctx.z = z;
    std::vector<T> grid = m.dec_fc.forward(z);
    nn::LeakyRelu<T>::forward_vec(grid, ctx.fc_mask);
    const std::size_t b = m.config.bottleneck_side();
    Tensor<T> t(m.config.final_channels(), b, b);
    t.data = std::move(grid);

    ctx.stages.resize(m.dec.size());
    for (std::size_t i = 0; i < m.dec.size(); ++i) {
        auto& sc = ctx.stages[i];
        sc.in_h = t.h;
        sc.in_w = t.w;
        t = nn::upsample2x(t);
        t = m.dec[i].forward(t, sc.cache);
        t = nn::LeakyRelu<T>::forward(t, sc.mask);
    }
    return m.dec_final.forward(t, ctx.final_cache);
}

template <typename T>
Tensor<T> decode(const VaeModel<T>& m, const std::vector<T>& z) {
    DecodeCtx<T> ctx;
    return decode(m, z, ctx);
}

/// Returns the gradient w.r.t. z.
template <typename T>
std::vector<T> decode_backward(VaeModel<T>& m, const Tensor<T>& dout, const DecodeCtx<T>& ctx) {
    Tensor<T> dt = m.dec_final.backward(dout, ctx.final_cache);
    for (std::size_t i = m.dec.size(); i-- > 0;) {
        const auto& sc = ctx.stages[i];
        dt = nn::LeakyRelu<T>::backward(dt, sc.mask);
        dt = m.dec[i].backward(dt, sc.cache);
        dt = nn::upsample2x_backward(dt);
    }
    std::vector<T> dgrid = std::move(dt.data);
    for (std::size_t i = 0; i < dgrid.size(); ++i)
        if (!ctx.fc_mask[i]) dgrid[i] *= static_cast<T>(nn::LeakyRelu<T>::slope);
    return m.dec_fc.backward(dgrid, ctx.z);
}

/// Copies all parameter tensors between two models of different scalar types
/// (e.g. the f32 training model into an f64 gradient-check model).
template <typename To, typename From>
VaeModel<To> model_cast(VaeModel<From>& src) {
    VaeModel<To> dst = init_model<To>(src.config);
    std::vector<std::vector<To>*> dst_tensors;
    dst.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::vector<To>& t) {
        dst_tensors.push_back(&t);
    });
    std::size_t idx = 0;
    src.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::vector<From>& t) {
        auto& d = *dst_tensors[idx++];
        for (std::size_t i = 0; i < t.size(); ++i) d[i] = static_cast<To>(t[i]);
    });
    return dst;
}

// ---------------------------------------------------------------------------
// Checkpoints: magic "SECK", version, config echo, trained-epoch counter,
// then named f32 tensors with explicit shapes. Optimizer moments are stored
// under "adam/..." names so training can resume bitwise.
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<std::vector<float>> m, v;
    std::uint64_t step = 0;
};

namespace detail {

inline void ck_put_u32(std::ostream& os, std::uint32_t v) { put_u32(os, v); }
inline void ck_put_u64(std::ostream& os, std::uint64_t v) {
    put_u32(os, static_cast<std::uint32_t>(v & 0xffffffffu));
    put_u32(os, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint64_t ck_get_u64(std::istream& is) {
    const std::uint64_t lo = get_u32(is);
    const std::uint64_t hi = get_u32(is);
    return lo | (hi << 32);
}

} // namespace detail

inline void save_checkpoint(VaeModel<float>& model, const std::string& path, const AdamState* adam = nullptr,
                            std::uint64_t trained_epochs = 0) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("SECK", 4);
    detail::ck_put_u32(os, 1u);
    const auto& c = model.config;
    detail::ck_put_u32(os, static_cast<std::uint32_t>(c.matrix_size));
    detail::ck_put_u32(os, static_cast<std::uint32_t>(c.latent_dim));
    detail::ck_put_u32(os, static_cast<std::uint32_t>(c.blocks));
    detail::ck_put_u32(os, static_cast<std::uint32_t>(c.base_channels));
    detail::ck_put_u64(os, c.seed);
    os.put(c.padding == PadMode::circular ? 0 : 1);
    os.put(c.mirror_sum ? 1 : 0);
    os.put(c.residual ? 1 : 0);
    detail::ck_put_u64(os, trained_epochs);

    std::uint32_t count = 0;
    model.for_each_tensor([&](const std::string&, const std::vector<std::size_t>&, std::vector<float>&) { ++count; });
    detail::ck_put_u32(os, adam ? count * 3 + 1 : count);

    auto write_tensor = [&](const std::string& name, const std::vector<std::size_t>& shape,
                            const std::vector<float>& data) {
        detail::ck_put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::ck_put_u32(os, static_cast<std::uint32_t>(shape.size()));
        for (auto d : shape) detail::ck_put_u32(os, static_cast<std::uint32_t>(d));
        for (float v : data) detail::put_f32(os, v);
    };

    std::size_t idx = 0;
    model.for_each_tensor([&](const std::string& name, const std::vector<std::size_t>& shape, std::vector<float>& t) {
        write_tensor(name, shape, t);
        if (adam) {
            write_tensor("adam/" + name + "/m", {adam->m[idx].size()}, adam->m[idx]);
            write_tensor("adam/" + name + "/v", {adam->v[idx].size()}, adam->v[idx]);
        }
        ++idx;
    });
    if (adam) write_tensor("adam/step", {1}, {static_cast<float>(adam->step)});
    if (!os) throw IoError("short write: " + path);
}

struct Checkpoint {
    VaeModel<float> model;
    std::optional<AdamState> adam;
    std::uint64_t trained_epochs = 0;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SECK", 4) != 0) throw CheckpointError("bad checkpoint magic: " + path);
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1) throw CheckpointError("unsupported checkpoint version: " + path);

    ModelConfig c;
    c.matrix_size = detail::get_u32(is);
    c.latent_dim = detail::get_u32(is);
    c.blocks = detail::get_u32(is);
    c.base_channels = detail::get_u32(is);
    c.seed = detail::ck_get_u64(is);
    c.padding = is.get() == 0 ? PadMode::circular : PadMode::zero;
    c.mirror_sum = is.get() != 0;
    c.residual = is.get() != 0;
    const std::uint64_t trained_epochs = detail::ck_get_u64(is);
    const std::uint32_t count = detail::get_u32(is);
    if (!is) throw CheckpointError("truncated checkpoint header: " + path);

    Checkpoint ck;
    ck.model = init_model<float>(c);
    ck.trained_epochs = trained_epochs;

    std::map<std::string, std::vector<float>> extra;
    std::map<std::string, std::vector<float>*> params;
    std::size_t tensor_count = 0;
    ck.model.for_each_tensor([&](const std::string& name, const std::vector<std::size_t>&, std::vector<float>& t) {
        params[name] = &t;
        ++tensor_count;
    });

    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = detail::get_u32(is);
        if (!is || name_len > 4096) throw CheckpointError("truncated checkpoint: " + path);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const std::uint32_t ndim = detail::get_u32(is);
        if (!is || ndim > 8) throw CheckpointError("truncated checkpoint: " + path);
        std::size_t total = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) total *= detail::get_u32(is);
        std::vector<float> data(total);
        for (auto& v : data) v = detail::get_f32(is);
        if (!is) throw CheckpointError("truncated checkpoint tensor '" + name + "': " + path);
        auto it = params.find(name);
        if (it != params.end()) {
            if (it->second->size() != total) throw CheckpointError("tensor size mismatch for '" + name + "'");
            *it->second = std::move(data);
        } else {
            extra[name] = std::move(data);
        }
    }

    if (extra.count("adam/step")) {
        AdamState adam;
        adam.step = static_cast<std::uint64_t>(extra["adam/step"][0]);
        ck.model.for_each_tensor([&](const std::string& name, const std::vector<std::size_t>&, std::vector<float>& t) {
            auto mi = extra.find("adam/" + name + "/m");
            auto vi = extra.find("adam/" + name + "/v");
            if (mi == extra.end() || vi == extra.end() || mi->second.size() != t.size() ||
                vi->second.size() != t.size())
                throw CheckpointError("incomplete optimizer state in " + path);
            adam.m.push_back(std::move(mi->second));
            adam.v.push_back(std::move(vi->second));
        });
        ck.adam = std::move(adam);
    }
    return ck;
}

} // namespace sedm
