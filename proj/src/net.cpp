#include "lmconv/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lmconv {

int ModelConfig::head_channels() const {
    switch (head) {
        case HeadKind::Binary:
            return 2;
        case HeadKind::LogisticMixture:
            // weights + per-channel means and log-scales, plus the three
            // subpixel coupling coefficients for color images.
            return channels == 3 ? 10 * n_mix : 3 * n_mix;
    }
    throw std::invalid_argument("unknown head kind");
}

void ModelConfig::validate() const {
    if (channels != 1 && channels != 3) {
        throw std::invalid_argument("channels must be 1 or 3");
    }
    if (height < 1 || width < 1) throw std::invalid_argument("image dims must be positive");
    if (hidden < 1) throw std::invalid_argument("hidden must be >= 1");
    if (depth < 1) throw std::invalid_argument("depth must be >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("kernel must be odd");
    if (dilations.size() != static_cast<size_t>(depth)) {
        throw std::invalid_argument("dilation schedule length must equal depth");
    }
    for (int d : dilations) {
        if (d < 1) throw std::invalid_argument("dilations must be >= 1");
    }
    if (n_mix < 1) throw std::invalid_argument("n_mix must be >= 1");
    if (bits < 1 || bits > 16) throw std::invalid_argument("bits must be in [1,16]");
    if (head == HeadKind::Binary && (channels != 1 || bits != 1)) {
        throw std::invalid_argument("binary head requires channels=1, bits=1");
    }
    if (norm_eps <= 0) throw std::invalid_argument("norm_eps must be positive");
}

std::vector<int> ModelConfig::default_dilations(int depth) {
    // Dilate at regular intervals instead of downsampling.
    static const int pattern[8] = {1, 1, 2, 1, 4, 1, 2, 1};
    std::vector<int> out(static_cast<size_t>(depth));
    for (int i = 0; i < depth; ++i) out[static_cast<size_t>(i)] = pattern[i % 8];
    return out;
}

NamedTensor& Parameters::at(const std::string& name) {
    for (NamedTensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::invalid_argument("no parameter tensor named " + name);
}

const NamedTensor& Parameters::at(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::invalid_argument("no parameter tensor named " + name);
}

bool Parameters::has(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

size_t Parameters::total_size() const {
    size_t n = 0;
    for (const NamedTensor& t : tensors) n += t.size();
    return n;
}

Parameters Parameters::zeros_like() const {
    Parameters out;
    out.tensors.reserve(tensors.size());
    for (const NamedTensor& t : tensors) {
        out.tensors.push_back({t.name, t.dims, std::vector<double>(t.values.size(), 0.0)});
    }
    return out;
}

Parameters init_parameters(const ModelConfig& config, uint64_t seed) {
    config.validate();
    std::mt19937_64 rng(seed);
    Parameters params;

    auto add = [&params](const std::string& name, std::vector<int> dims, double init_bound,
                         std::mt19937_64* gen) {
        size_t n = 1;
        for (int d : dims) n *= static_cast<size_t>(d);
        NamedTensor t{name, std::move(dims), std::vector<double>(n, 0.0)};
        if (gen != nullptr) {
            std::uniform_real_distribution<double> dist(-init_bound, init_bound);
            for (double& v : t.values) v = dist(*gen);
        } else if (init_bound != 0.0) {
            std::fill(t.values.begin(), t.values.end(), init_bound);
        }
        params.tensors.push_back(std::move(t));
    };

    const int k = config.kernel;
    for (int l = 0; l < config.depth; ++l) {
        const int c_in = l == 0 ? config.channels : config.hidden;
        const int fan_in = c_in * k * k;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        const std::string prefix = "conv" + std::to_string(l);
        if (l > 0) {
            add("norm" + std::to_string(l) + ".gain", {config.hidden}, 1.0, nullptr);
            add("norm" + std::to_string(l) + ".shift", {config.hidden}, 0.0, nullptr);
        }
        add(prefix + ".weight", {config.hidden, fan_in}, bound, &rng);
        add(prefix + ".bias", {config.hidden}, 0.0, nullptr);
        if (config.mask_conditioning) {
            const double mbound = 1.0 / std::sqrt(static_cast<double>(k * k));
            add(prefix + ".mask_weight", {config.hidden, k * k}, mbound, &rng);
        }
    }
    add("head_norm.gain", {config.hidden}, 1.0, nullptr);
    add("head_norm.shift", {config.hidden}, 0.0, nullptr);
    const double head_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden));
    add("head.weight", {config.head_channels(), config.hidden}, head_bound, &rng);
    add("head.bias", {config.head_channels()}, 0.0, nullptr);
    return params;
}

LayerMasks masks_for_order(MaskCache& cache, const GenerationOrder& order,
                           const ModelConfig& config) {
    if (order.height() != config.height || order.width() != config.width) {
        throw std::invalid_argument("order grid does not match model config");
    }
    LayerMasks masks;
    masks.reserve(static_cast<size_t>(config.depth));
    for (int l = 0; l < config.depth; ++l) {
        const int c_in = l == 0 ? config.channels : config.hidden;
        masks.push_back(&cache.get(order, c_in, config.kernel, config.kernel,
                                   config.dilations[static_cast<size_t>(l)], l == 0));
    }
    return masks;
}

size_t ForwardTape::retained_bytes() const {
    size_t bytes = 0;
    for (const ConvContext& c : conv_ctx) bytes += c.retained_bytes();
    for (const Tensor4& t : norm_in) bytes += t.size() * sizeof(double);
    for (const Tensor4& t : elu_in) bytes += t.size() * sizeof(double);
    bytes += head_in.size() * sizeof(double);
    return bytes;
}

Tensor4 channel_norm(const Tensor4& x, const double* gain, const double* shift, double eps) {
    const int cn = x.channels();
    Tensor4 out(x.batch(), cn, x.height(), x.width());
    for (int b = 0; b < x.batch(); ++b) {
        for (int r = 0; r < x.height(); ++r) {
            for (int c = 0; c < x.width(); ++c) {
                double mean = 0.0;
                for (int ch = 0; ch < cn; ++ch) mean += x(b, ch, r, c);
                mean /= cn;
                double var = 0.0;
                for (int ch = 0; ch < cn; ++ch) {
                    const double d = x(b, ch, r, c) - mean;
                    var += d * d;
                }
                var /= cn;
                const double istd = 1.0 / std::sqrt(var + eps);
                for (int ch = 0; ch < cn; ++ch) {
                    const double xhat = (x(b, ch, r, c) - mean) * istd;
                    out(b, ch, r, c) = gain[ch] * xhat + shift[ch];
                }
            }
        }
    }
    return out;
}

Tensor4 channel_norm_backward(const Tensor4& grad_out, const Tensor4& x, const double* gain,
                              double eps, double* grad_gain, double* grad_shift) {
    const int cn = x.channels();
    Tensor4 grad_x(x.batch(), cn, x.height(), x.width());
    for (int b = 0; b < x.batch(); ++b) {
        for (int r = 0; r < x.height(); ++r) {
            for (int c = 0; c < x.width(); ++c) {
                double mean = 0.0;
                for (int ch = 0; ch < cn; ++ch) mean += x(b, ch, r, c);
                mean /= cn;
                double var = 0.0;
                for (int ch = 0; ch < cn; ++ch) {
                    const double d = x(b, ch, r, c) - mean;
                    var += d * d;
                }
                var /= cn;
                const double istd = 1.0 / std::sqrt(var + eps);

                double mean_dxhat = 0.0;
                double mean_dxhat_xhat = 0.0;
                for (int ch = 0; ch < cn; ++ch) {
                    const double xhat = (x(b, ch, r, c) - mean) * istd;
                    const double g = grad_out(b, ch, r, c);
                    grad_gain[ch] += g * xhat;
                    grad_shift[ch] += g;
                    const double dxhat = g * gain[ch];
                    mean_dxhat += dxhat;
                    mean_dxhat_xhat += dxhat * xhat;
                }
                mean_dxhat /= cn;
                mean_dxhat_xhat /= cn;
                for (int ch = 0; ch < cn; ++ch) {
                    const double xhat = (x(b, ch, r, c) - mean) * istd;
                    const double dxhat = grad_out(b, ch, r, c) * gain[ch];
                    grad_x(b, ch, r, c) =
                        istd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
                }
            }
        }
    }
    return grad_x;
}

Tensor4 elu(const Tensor4& x) {
    Tensor4 out = x;
    double* v = out.data();
    for (size_t i = 0; i < out.size(); ++i) {
        if (v[i] <= 0.0) v[i] = std::expm1(v[i]);
    }
    return out;
}

Tensor4 elu_backward(const Tensor4& grad_out, const Tensor4& x) {
    Tensor4 grad_x = grad_out;
    double* g = grad_x.data();
    const double* v = x.data();
    for (size_t i = 0; i < grad_x.size(); ++i) {
        if (v[i] <= 0.0) g[i] *= std::exp(v[i]);
    }
    return grad_x;
}

Tensor4 rescale_to_unit(const Tensor4& raw, int bits) {
    Tensor4 out = raw;
    const double scale = 2.0 / static_cast<double>((1 << bits) - 1);
    double* v = out.data();
    for (size_t i = 0; i < out.size(); ++i) v[i] = v[i] * scale - 1.0;
    return out;
}

double rescale_value(double raw, int bits) {
    return raw * 2.0 / static_cast<double>((1 << bits) - 1) - 1.0;
}

namespace {

struct LayerViews {
    ConvParams conv;
    const double* norm_gain = nullptr;  // null for the stem layer
    const double* norm_shift = nullptr;
};

LayerViews layer_views(const ModelConfig& config, const Parameters& params, int l) {
    LayerViews v;
    const std::string prefix = "conv" + std::to_string(l);
    v.conv.weight = params.at(prefix + ".weight").values.data();
    v.conv.bias = params.at(prefix + ".bias").values.data();
    v.conv.c_out = config.hidden;
    if (config.mask_conditioning) {
        v.conv.mask_weight = params.at(prefix + ".mask_weight").values.data();
    }
    if (l > 0) {
        v.norm_gain = params.at("norm" + std::to_string(l) + ".gain").values.data();
        v.norm_shift = params.at("norm" + std::to_string(l) + ".shift").values.data();
    }
    return v;
}

// out[b] = W (p x c) * x[b] (c x hw) + bias
Tensor4 pointwise_forward(const Tensor4& x, const double* weight, const double* bias, int p) {
    const int c = x.channels();
    const int hw = x.height() * x.width();
    Tensor4 out(x.batch(), p, x.height(), x.width());
    for (int b = 0; b < x.batch(); ++b) {
        double* dst = out.data() + static_cast<size_t>(b) * p * hw;
        const double* src = x.data() + static_cast<size_t>(b) * c * hw;
        gemm_acc(weight, p, c, src, hw, dst);
        for (int i = 0; i < p; ++i) {
            double* row = dst + static_cast<size_t>(i) * hw;
            for (int j = 0; j < hw; ++j) row[j] += bias[i];
        }
    }
    return out;
}

Tensor4 pointwise_backward(const Tensor4& grad_out, const Tensor4& x, const double* weight,
                           int p, double* grad_weight, double* grad_bias) {
    const int c = x.channels();
    const int hw = x.height() * x.width();
    Tensor4 grad_x(x.batch(), c, x.height(), x.width());
    for (int b = 0; b < x.batch(); ++b) {
        const double* g = grad_out.data() + static_cast<size_t>(b) * p * hw;
        const double* src = x.data() + static_cast<size_t>(b) * c * hw;
        gemm_abt_acc(g, p, hw, src, c, grad_weight);
        for (int i = 0; i < p; ++i) {
            const double* row = g + static_cast<size_t>(i) * hw;
            double acc = 0.0;
            for (int j = 0; j < hw; ++j) acc += row[j];
            grad_bias[i] += acc;
        }
        double* gx = grad_x.data() + static_cast<size_t>(b) * c * hw;
        gemm_atb_acc(weight, p, c, g, hw, gx);
    }
    return grad_x;
}

void add_inplace(Tensor4& a, const Tensor4& b) {
    double* x = a.data();
    const double* y = b.data();
    for (size_t i = 0; i < a.size(); ++i) x[i] += y[i];
}

}  // namespace

Tensor4 net_forward(const ModelConfig& config, const Parameters& params, const Tensor4& x,
                    const LayerMasks& masks, ForwardTape* tape, bool store_patches) {
    config.validate();
    if (masks.size() != static_cast<size_t>(config.depth)) {
        throw std::invalid_argument("need one mask per conv layer");
    }
    if (x.channels() != config.channels || x.height() != config.height ||
        x.width() != config.width) {
        throw std::invalid_argument("net_forward: input " + x.shape_str() +
                                    " does not match model config");
    }
    if (tape != nullptr) {
        tape->conv_ctx.assign(static_cast<size_t>(config.depth), ConvContext{});
        tape->norm_in.clear();
        tape->elu_in.clear();
    }

    int layer = 0;
    try {
        LayerViews stem = layer_views(config, params, 0);
        Tensor4 h = lmconv_forward(x, *masks[0], stem.conv,
                                   tape != nullptr ? &tape->conv_ctx[0] : nullptr, store_patches);
        for (layer = 1; layer < config.depth; ++layer) {
            LayerViews v = layer_views(config, params, layer);
            if (tape != nullptr) tape->norm_in.push_back(h);
            Tensor4 u = channel_norm(h, v.norm_gain, v.norm_shift, config.norm_eps);
            if (tape != nullptr) tape->elu_in.push_back(u);
            Tensor4 a = elu(u);
            Tensor4 t = lmconv_forward(a, *masks[static_cast<size_t>(layer)], v.conv,
                                       tape != nullptr ? &tape->conv_ctx[static_cast<size_t>(layer)]
                                                       : nullptr,
                                       store_patches);
            add_inplace(h, t);
            require_finite(h, "residual sum");
        }
        layer = config.depth;
        if (tape != nullptr) tape->norm_in.push_back(h);
        Tensor4 u = channel_norm(h, params.at("head_norm.gain").values.data(),
                                 params.at("head_norm.shift").values.data(), config.norm_eps);
        if (tape != nullptr) tape->elu_in.push_back(u);
        Tensor4 a = elu(u);
        if (tape != nullptr) tape->head_in = a;
        Tensor4 out = pointwise_forward(a, params.at("head.weight").values.data(),
                                        params.at("head.bias").values.data(),
                                        config.head_channels());
        require_finite(out, "head output");
        return out;
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at layer " + std::to_string(layer));
    }
}

void net_backward(const ModelConfig& config, const Parameters& params, const ForwardTape& tape,
                  const Tensor4& grad_out, Parameters& grads, Tensor4* grad_x) {
    if (tape.conv_ctx.size() != static_cast<size_t>(config.depth) ||
        tape.norm_in.size() != static_cast<size_t>(config.depth) ||
        tape.elu_in.size() != static_cast<size_t>(config.depth)) {
        throw std::invalid_argument("net_backward: tape does not match config");
    }

    // Head projection, then the trailing norm/ELU pair.
    Tensor4 grad_a = pointwise_backward(grad_out, tape.head_in,
                                        params.at("head.weight").values.data(),
                                        config.head_channels(),
                                        grads.at("head.weight").values.data(),
                                        grads.at("head.bias").values.data());
    Tensor4 grad_u = elu_backward(grad_a, tape.elu_in.back());
    Tensor4 grad_h = channel_norm_backward(grad_u, tape.norm_in.back(),
                                           params.at("head_norm.gain").values.data(),
                                           config.norm_eps,
                                           grads.at("head_norm.gain").values.data(),
                                           grads.at("head_norm.shift").values.data());

    for (int l = config.depth - 1; l >= 1; --l) {
        const std::string prefix = "conv" + std::to_string(l);
        LayerViews v = layer_views(config, params, l);
        ConvGrads cg;
        cg.weight = grads.at(prefix + ".weight").values.data();
        cg.bias = grads.at(prefix + ".bias").values.data();
        cg.c_out = config.hidden;
        if (config.mask_conditioning) {
            cg.mask_weight = grads.at(prefix + ".mask_weight").values.data();
        }
        Tensor4 branch = lmconv_backward(grad_h, tape.conv_ctx[static_cast<size_t>(l)], v.conv, cg);
        Tensor4 gu = elu_backward(branch, tape.elu_in[static_cast<size_t>(l) - 1]);
        Tensor4 gh = channel_norm_backward(gu, tape.norm_in[static_cast<size_t>(l) - 1],
                                           v.norm_gain, config.norm_eps,
                                           grads.at("norm" + std::to_string(l) + ".gain")
                                               .values.data(),
                                           grads.at("norm" + std::to_string(l) + ".shift")
                                               .values.data());
        add_inplace(grad_h, gh);  // residual skip
    }

    LayerViews stem = layer_views(config, params, 0);
    ConvGrads cg;
    cg.weight = grads.at("conv0.weight").values.data();
    cg.bias = grads.at("conv0.bias").values.data();
    cg.c_out = config.hidden;
    if (config.mask_conditioning) cg.mask_weight = grads.at("conv0.mask_weight").values.data();
    Tensor4 gx = lmconv_backward(grad_h, tape.conv_ctx[0], stem.conv, cg);
    if (grad_x != nullptr) *grad_x = std::move(gx);
}

}  // namespace lmconv
