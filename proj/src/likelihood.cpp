#include "lmconv/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lmconv {

namespace {

constexpr double kLogScaleMin = -7.0;

double log_expm1(double t) {
    // log(e^t - 1) without overflow; t > 0.
    if (t > 36.0) return t + std::log1p(-std::exp(-t));
    return std::log(std::expm1(t));
}

struct DlmChannel {
    // Per-component pieces of one channel's discretized logistic term.
    double log_p = 0.0;
    double dmu = 0.0;       // d log_p / d mean
    double dlog_s = 0.0;    // d log_p / d log_scale (0 where clamped)
};

DlmChannel dlm_channel(double x, double mean, double log_scale, int v, int levels,
                       double bin_width) {
    const bool clamped = log_scale < kLogScaleMin;
    const double ls = clamped ? kLogScaleMin : log_scale;
    const double inv_s = std::exp(-ls);
    const double centered = x - mean;
    const double plus = (centered + bin_width / 2.0) * inv_s;
    const double minus = (centered - bin_width / 2.0) * inv_s;

    DlmChannel out;
    if (v == 0) {
        out.log_p = -softplus(-plus);
        const double s = sigmoid(-plus);
        out.dmu = -inv_s * s;
        out.dlog_s = -plus * s;
    } else if (v == levels - 1) {
        out.log_p = -softplus(minus);
        const double s = sigmoid(minus);
        out.dmu = inv_s * s;
        out.dlog_s = minus * s;
    } else {
        // sigma(plus) - sigma(minus) = sigma(minus) * sigma(-plus) * expm1(plus-minus),
        // exact in logs for every regime.
        const double seg = bin_width * inv_s;
        out.log_p = -softplus(-minus) - softplus(plus) + log_expm1(seg);
        const double sm = sigmoid(-minus);
        const double sp = sigmoid(plus);
        out.dmu = inv_s * (sp - sm);
        const double e = 1.0 / (-std::expm1(-seg));  // e^seg / (e^seg - 1)
        out.dlog_s = -minus * sm + plus * sp - seg * e;
    }
    if (clamped) out.dlog_s = 0.0;
    return out;
}

}  // namespace

double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

double log_sigmoid(double z) { return -softplus(-z); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sum_exp(const double* v, int n) {
    double m = v[0];
    for (int i = 1; i < n; ++i) m = std::max(m, v[i]);
    if (!std::isfinite(m)) return m;  // all -inf (or a nan) propagates
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::exp(v[i] - m);
    return m + std::log(acc);
}

double binary_log_prob(double logit0, double logit1, int v) {
    if (v != 0 && v != 1) throw std::invalid_argument("binary value must be 0 or 1");
    const double z = v == 1 ? logit1 - logit0 : logit0 - logit1;
    return log_sigmoid(z);
}

double dlm_log_prob(const double* weight_logits, const double* means, const double* log_scales,
                    int n_mix, int v, int bits) {
    const int levels = 1 << bits;
    if (v < 0 || v >= levels) {
        throw std::invalid_argument("intensity " + std::to_string(v) + " out of range for " +
                                    std::to_string(bits) + "-bit data");
    }
    const double bin_width = 2.0 / static_cast<double>(levels - 1);
    const double x = rescale_value(v, bits);
    const double lw = log_sum_exp(weight_logits, n_mix);
    std::vector<double> terms(static_cast<size_t>(n_mix));
    for (int i = 0; i < n_mix; ++i) {
        terms[static_cast<size_t>(i)] =
            weight_logits[i] - lw +
            dlm_channel(x, means[i], log_scales[i], v, levels, bin_width).log_p;
    }
    return log_sum_exp(terms.data(), n_mix);
}

namespace {

// Pixel-level NLL + gradient for each head. Channel layout within head_out:
//   binary:      [2 logits]
//   gray dlm:    [n logits | n means | n log_scales]
//   color dlm:   [n logits | 3n means | 3n log_scales | 3n coeffs]
// Coefficients couple the green mean to red and the blue mean to red+green
// through tanh, using the (rescaled) target subpixels.
double binary_pixel_nll(const Tensor4& head_out, const Tensor4& raw, int b, int r, int c,
                        Tensor4* grad, double scale) {
    const double z0 = head_out(b, 0, r, c);
    const double z1 = head_out(b, 1, r, c);
    const int v = static_cast<int>(raw(b, 0, r, c));
    const double lp = binary_log_prob(z0, z1, v);
    if (grad != nullptr) {
        const double p1 = sigmoid(z1 - z0);
        (*grad)(b, 0, r, c) += scale * ((1.0 - p1) - (v == 0 ? 1.0 : 0.0));
        (*grad)(b, 1, r, c) += scale * (p1 - (v == 1 ? 1.0 : 0.0));
    }
    return -lp;
}

double dlm_pixel_nll(const ModelConfig& config, const Tensor4& head_out, const Tensor4& raw,
                     int b, int r, int c, Tensor4* grad, double scale) {
    const int n = config.n_mix;
    const int ch = config.channels;
    const int levels = config.levels();
    const double bin_width = 2.0 / static_cast<double>(levels - 1);

    int v[3] = {0, 0, 0};
    double x[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < ch; ++k) {
        v[k] = static_cast<int>(raw(b, k, r, c));
        if (v[k] < 0 || v[k] >= levels) {
            throw std::invalid_argument("intensity out of range at pixel (" + std::to_string(r) +
                                        "," + std::to_string(c) + ")");
        }
        x[k] = rescale_value(v[k], config.bits);
    }

    std::vector<double> logits(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) logits[static_cast<size_t>(i)] = head_out(b, i, r, c);
    const double lw = log_sum_exp(logits.data(), n);

    std::vector<DlmChannel> parts(static_cast<size_t>(n) * ch);
    std::vector<double> terms(static_cast<size_t>(n));
    std::vector<double> tanh_c(static_cast<size_t>(3) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        if (ch == 3) {
            tanh_c[static_cast<size_t>(i)] = std::tanh(head_out(b, 7 * n + i, r, c));
            tanh_c[static_cast<size_t>(n + i)] = std::tanh(head_out(b, 8 * n + i, r, c));
            tanh_c[static_cast<size_t>(2 * n + i)] = std::tanh(head_out(b, 9 * n + i, r, c));
        }
        double comp_lp = 0.0;
        for (int k = 0; k < ch; ++k) {
            double mean = head_out(b, n + k * n + i, r, c);
            if (ch == 3) {
                if (k == 1) mean += tanh_c[static_cast<size_t>(i)] * x[0];
                if (k == 2) {
                    mean += tanh_c[static_cast<size_t>(n + i)] * x[0] +
                            tanh_c[static_cast<size_t>(2 * n + i)] * x[1];
                }
            }
            const double log_scale = head_out(b, n + ch * n + k * n + i, r, c);
            DlmChannel part = dlm_channel(x[k], mean, log_scale, v[k], levels, bin_width);
            parts[static_cast<size_t>(i) * ch + k] = part;
            comp_lp += part.log_p;
        }
        terms[static_cast<size_t>(i)] = logits[static_cast<size_t>(i)] - lw + comp_lp;
    }
    const double lp = log_sum_exp(terms.data(), n);

    if (grad != nullptr) {
        for (int i = 0; i < n; ++i) {
            const double resp = std::exp(terms[static_cast<size_t>(i)] - lp);
            const double wsoft = std::exp(logits[static_cast<size_t>(i)] - lw);
            // d(-lp)/d logit_i
            (*grad)(b, i, r, c) += scale * (wsoft - resp);
            for (int k = 0; k < ch; ++k) {
                const DlmChannel& part = parts[static_cast<size_t>(i) * ch + k];
                (*grad)(b, n + k * n + i, r, c) += scale * (-resp * part.dmu);
                (*grad)(b, n + ch * n + k * n + i, r, c) += scale * (-resp * part.dlog_s);
            }
            if (ch == 3) {
                const double dmu_g = parts[static_cast<size_t>(i) * ch + 1].dmu;
                const double dmu_b = parts[static_cast<size_t>(i) * ch + 2].dmu;
                const double c0 = tanh_c[static_cast<size_t>(i)];
                const double c1 = tanh_c[static_cast<size_t>(n + i)];
                const double c2 = tanh_c[static_cast<size_t>(2 * n + i)];
                (*grad)(b, 7 * n + i, r, c) +=
                    scale * (-resp * dmu_g * x[0] * (1.0 - c0 * c0));
                (*grad)(b, 8 * n + i, r, c) +=
                    scale * (-resp * dmu_b * x[0] * (1.0 - c1 * c1));
                (*grad)(b, 9 * n + i, r, c) +=
                    scale * (-resp * dmu_b * x[1] * (1.0 - c2 * c2));
            }
        }
    }
    return -lp;
}

}  // namespace

double pixel_nll(const ModelConfig& config, const Tensor4& head_out, const Tensor4& raw, int b,
                 int r, int c, Tensor4* grad, double scale) {
    if (config.head == HeadKind::Binary) {
        return binary_pixel_nll(head_out, raw, b, r, c, grad, scale);
    }
    return dlm_pixel_nll(config, head_out, raw, b, r, c, grad, scale);
}

std::vector<double> head_nll(const ModelConfig& config, const Tensor4& head_out,
                             const Tensor4& raw, Tensor4* grad, double scale) {
    if (head_out.batch() != raw.batch() || head_out.height() != raw.height() ||
        head_out.width() != raw.width() || head_out.channels() != config.head_channels()) {
        throw std::invalid_argument("head_nll: shape mismatch");
    }
    std::vector<double> nll(static_cast<size_t>(raw.batch()), 0.0);
    for (int b = 0; b < raw.batch(); ++b) {
        double acc = 0.0;
        for (int r = 0; r < raw.height(); ++r) {
            for (int c = 0; c < raw.width(); ++c) {
                acc += pixel_nll(config, head_out, raw, b, r, c, grad, scale);
            }
        }
        nll[static_cast<size_t>(b)] = acc;
    }
    return nll;
}

namespace {

int sample_discrete_logistic(double mean, double log_scale, double temperature, int bits,
                             std::mt19937_64& rng) {
    const double s = std::exp(std::max(log_scale, kLogScaleMin)) * temperature;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    const double y = mean + s * (std::log(u) - std::log1p(-u));
    const double clamped = std::clamp(y, -1.0, 1.0);
    const int levels = 1 << bits;
    const int v = static_cast<int>(std::lround((clamped + 1.0) / 2.0 * (levels - 1)));
    return std::clamp(v, 0, levels - 1);
}

int sample_categorical(const double* logits, int n, double temperature, std::mt19937_64& rng) {
    std::vector<double> scaled(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) scaled[static_cast<size_t>(i)] = logits[i] / temperature;
    const double lse = log_sum_exp(scaled.data(), n);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double u = unit(rng);
    for (int i = 0; i < n; ++i) {
        u -= std::exp(scaled[static_cast<size_t>(i)] - lse);
        if (u <= 0.0) return i;
    }
    return n - 1;
}

}  // namespace

double sample_pixel(const ModelConfig& config, const Tensor4& head_out, Tensor4& raw, int b,
                    int r, int c, std::mt19937_64& rng, double temperature) {
    if (config.head == HeadKind::Binary) {
        const double z0 = head_out(b, 0, r, c);
        const double z1 = head_out(b, 1, r, c);
        const double p1 = sigmoid((z1 - z0) / temperature);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const int v = unit(rng) < p1 ? 1 : 0;
        raw(b, 0, r, c) = static_cast<double>(v);
        return binary_log_prob(z0, z1, v);
    }

    const int n = config.n_mix;
    std::vector<double> logits(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) logits[static_cast<size_t>(i)] = head_out(b, i, r, c);
    const int comp = sample_categorical(logits.data(), n, temperature, rng);

    const int ch = config.channels;
    double xs[3] = {0.0, 0.0, 0.0};
    for (int k = 0; k < ch; ++k) {
        double mean = head_out(b, n + k * n + comp, r, c);
        if (ch == 3) {
            if (k == 1) mean += std::tanh(head_out(b, 7 * n + comp, r, c)) * xs[0];
            if (k == 2) {
                mean += std::tanh(head_out(b, 8 * n + comp, r, c)) * xs[0] +
                        std::tanh(head_out(b, 9 * n + comp, r, c)) * xs[1];
            }
        }
        const double log_scale = head_out(b, n + ch * n + k * n + comp, r, c);
        const int v = sample_discrete_logistic(mean, log_scale, temperature, config.bits, rng);
        raw(b, k, r, c) = static_cast<double>(v);
        xs[k] = rescale_value(v, config.bits);
    }
    return -pixel_nll(config, head_out, raw, b, r, c);
}

std::vector<double> joint_nll(const ModelConfig& config, const Parameters& params,
                              MaskCache& cache, const GenerationOrder& order,
                              const Tensor4& raw_batch) {
    const LayerMasks masks = masks_for_order(cache, order, config);
    const Tensor4 input = rescale_to_unit(raw_batch, config.bits);
    const Tensor4 out = net_forward(config, params, input, masks);
    return head_nll(config, out, raw_batch);
}

std::vector<double> ensemble_nll(const ModelConfig& config, const Parameters& params,
                                 MaskCache& cache, const std::vector<GenerationOrder>& orders,
                                 const Tensor4& raw_batch) {
    if (orders.empty()) throw std::invalid_argument("ensemble_nll: need at least one order");
    const int batch = raw_batch.batch();
    const int k = static_cast<int>(orders.size());
    std::vector<double> neg(static_cast<size_t>(batch) * k);
    for (int oi = 0; oi < k; ++oi) {
        const std::vector<double> nll = joint_nll(config, params, cache, orders[static_cast<size_t>(oi)], raw_batch);
        for (int b = 0; b < batch; ++b) {
            neg[static_cast<size_t>(b) * k + oi] = -nll[static_cast<size_t>(b)];
        }
    }
    std::vector<double> out(static_cast<size_t>(batch));
    for (int b = 0; b < batch; ++b) {
        out[static_cast<size_t>(b)] =
            std::log(static_cast<double>(k)) - log_sum_exp(neg.data() + static_cast<size_t>(b) * k, k);
    }
    return out;
}

double uniform_head_nll(const ModelConfig& config) {
    return static_cast<double>(config.pixel_dims() * config.bits) * M_LN2;
}

double bits_per_dim(double nats, const ModelConfig& config) {
    return nats / (static_cast<double>(config.pixel_dims()) * M_LN2);
}

}  // namespace lmconv
