#include "lmconv/engine.hpp"

#include <cmath>
#include <stdexcept>

namespace lmconv {

OptimizerState OptimizerState::like(const Parameters& params) {
    OptimizerState opt;
    opt.m.reserve(params.tensors.size());
    opt.v.reserve(params.tensors.size());
    for (const NamedTensor& t : params.tensors) {
        opt.m.emplace_back(t.size(), 0.0);
        opt.v.emplace_back(t.size(), 0.0);
    }
    return opt;
}

double global_norm(const Parameters& grads) {
    double acc = 0.0;
    for (const NamedTensor& t : grads.tensors) {
        for (double v : t.values) acc += v * v;
    }
    return std::sqrt(acc);
}

StepResult train_step(const ModelConfig& config, Parameters& params, OptimizerState& opt,
                      MaskCache& cache, const TrainConfig& train, const Tensor4& batch_raw,
                      std::mt19937_64& rng) {
    if (train.orders.empty()) throw std::invalid_argument("train_step: empty order set");
    if (train.lr <= 0.0) throw std::invalid_argument("train_step: lr must be positive");
    if (train.lr_decay <= 0.0 || train.lr_decay > 1.0) {
        throw std::invalid_argument("train_step: lr_decay must be in (0,1]");
    }
    if (opt.m.size() != params.tensors.size()) {
        throw std::invalid_argument("train_step: optimizer state does not match parameters");
    }

    StepResult result;
    std::uniform_int_distribution<size_t> pick(0, train.orders.size() - 1);
    const size_t oi = pick(rng);
    result.order_index = static_cast<int>(oi);
    const GenerationOrder& order = train.orders[oi];

    Parameters grads = params.zeros_like();
    try {
        const LayerMasks masks = masks_for_order(cache, order, config);
        const Tensor4 input = rescale_to_unit(batch_raw, config.bits);
        ForwardTape tape;
        const Tensor4 out = net_forward(config, params, input, masks, &tape);

        const double inv_batch = 1.0 / static_cast<double>(batch_raw.batch());
        Tensor4 head_grad(out.batch(), out.channels(), out.height(), out.width());
        const std::vector<double> nll = head_nll(config, out, batch_raw, &head_grad, inv_batch);
        double loss = 0.0;
        for (double v : nll) loss += v;
        loss *= inv_batch;
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        result.loss = loss;

        net_backward(config, params, tape, head_grad, grads);
        const double norm = global_norm(grads);
        if (!std::isfinite(norm)) throw NumericError("non-finite gradients");
        result.grad_norm = norm;
    } catch (const NumericError& e) {
        // Parameters are untouched; report which step aborted.
        throw NumericError("step " + std::to_string(opt.step + 1) + " aborted: " + e.what());
    }
    const double clip_scale = (train.clip_norm > 0.0 && result.grad_norm > train.clip_norm)
                                  ? train.clip_norm / result.grad_norm
                                  : 1.0;

    opt.step += 1;
    const double lr = train.lr * std::pow(train.lr_decay, static_cast<double>(opt.step - 1));
    result.lr = lr;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        std::vector<double>& theta = params.tensors[t].values;
        const std::vector<double>& g = grads.tensors[t].values;
        std::vector<double>& m = opt.m[t];
        std::vector<double>& v = opt.v[t];
        for (size_t i = 0; i < theta.size(); ++i) {
            const double gi = g[i] * clip_scale;
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (std::sqrt(vhat) + opt.eps);
        }
    }
    return result;
}

Tensor4 sample(const ModelConfig& config, const Parameters& params, MaskCache& cache,
               const GenerationOrder& order, std::mt19937_64& rng, double temperature,
               double* accumulated_log_prob) {
    const LayerMasks masks = masks_for_order(cache, order, config);
    // Not-yet-generated pixels sit at zero in the model input; the masks
    // keep them invisible to the conditional being sampled either way.
    Tensor4 raw(1, config.channels, config.height, config.width);
    Tensor4 input(1, config.channels, config.height, config.width);
    double log_prob = 0.0;
    for (const Coord& cell : order.sequence()) {
        const Tensor4 out = net_forward(config, params, input, masks);
        log_prob += sample_pixel(config, out, raw, 0, cell.row, cell.col, rng, temperature);
        for (int ch = 0; ch < config.channels; ++ch) {
            input(0, ch, cell.row, cell.col) = rescale_value(raw(0, ch, cell.row, cell.col),
                                                             config.bits);
        }
    }
    if (accumulated_log_prob != nullptr) *accumulated_log_prob = log_prob;
    return raw;
}

Tensor4 complete(const ModelConfig& config, const Parameters& params, MaskCache& cache,
                 const Tensor4& image_raw, const ObservedSet& observed,
                 const GenerationOrder& order, std::mt19937_64& rng, double temperature) {
    if (observed.height != order.height() || observed.width != order.width()) {
        throw std::invalid_argument("complete: observed set grid does not match order");
    }
    if (image_raw.batch() != 1 || image_raw.channels() != config.channels ||
        image_raw.height() != config.height || image_raw.width() != config.width) {
        throw std::invalid_argument("complete: image shape mismatch");
    }
    const int n_obs = observed.count();
    for (int i = 0; i < order.size(); ++i) {
        const Coord& cell = order.at(i);
        const bool in_prefix = i < n_obs;
        if (observed.observed(cell.row, cell.col) != in_prefix) {
            throw std::invalid_argument("complete: order prefix does not equal the observed set");
        }
    }

    const LayerMasks masks = masks_for_order(cache, order, config);
    // Observed pixels keep their values; the hidden region enters the model
    // input as zeros (on the rescaled scale) until sampled.
    Tensor4 raw(1, config.channels, config.height, config.width);
    Tensor4 input(1, config.channels, config.height, config.width);
    for (int ch = 0; ch < config.channels; ++ch) {
        for (int r = 0; r < config.height; ++r) {
            for (int c = 0; c < config.width; ++c) {
                if (observed.observed(r, c)) {
                    raw(0, ch, r, c) = image_raw(0, ch, r, c);
                    input(0, ch, r, c) = rescale_value(image_raw(0, ch, r, c), config.bits);
                }
            }
        }
    }
    for (int i = n_obs; i < order.size(); ++i) {
        const Coord& cell = order.at(i);
        const Tensor4 out = net_forward(config, params, input, masks);
        sample_pixel(config, out, raw, 0, cell.row, cell.col, rng, temperature);
        for (int ch = 0; ch < config.channels; ++ch) {
            input(0, ch, cell.row, cell.col) = rescale_value(raw(0, ch, cell.row, cell.col),
                                                             config.bits);
        }
    }
    return raw;
}

double conditional_nll(const ModelConfig& config, const Parameters& params, MaskCache& cache,
                       const Tensor4& image_raw, const ObservedSet& observed,
                       const GenerationOrder& order) {
    if (observed.height != order.height() || observed.width != order.width()) {
        throw std::invalid_argument("conditional_nll: observed set grid does not match order");
    }
    if (image_raw.batch() != 1) {
        throw std::invalid_argument("conditional_nll: expects a single image");
    }
    const LayerMasks masks = masks_for_order(cache, order, config);
    const Tensor4 input = rescale_to_unit(image_raw, config.bits);
    const Tensor4 out = net_forward(config, params, input, masks);
    double nll = 0.0;
    for (int r = 0; r < config.height; ++r) {
        for (int c = 0; c < config.width; ++c) {
            if (!observed.observed(r, c)) {
                nll += pixel_nll(config, out, image_raw, 0, r, c);
            }
        }
    }
    return nll;
}

Parameters average_parameters(const std::vector<Parameters>& checkpoints) {
    if (checkpoints.empty()) throw std::invalid_argument("average_parameters: empty list");
    Parameters avg = checkpoints.front();
    for (size_t k = 1; k < checkpoints.size(); ++k) {
        const Parameters& p = checkpoints[k];
        if (p.tensors.size() != avg.tensors.size()) {
            throw std::invalid_argument("average_parameters: tensor count mismatch");
        }
        for (size_t t = 0; t < avg.tensors.size(); ++t) {
            if (p.tensors[t].dims != avg.tensors[t].dims ||
                p.tensors[t].name != avg.tensors[t].name) {
                throw std::invalid_argument("average_parameters: shape mismatch in " +
                                            avg.tensors[t].name);
            }
            for (size_t i = 0; i < avg.tensors[t].values.size(); ++i) {
                avg.tensors[t].values[i] += p.tensors[t].values[i];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(checkpoints.size());
    for (NamedTensor& t : avg.tensors) {
        for (double& v : t.values) v *= inv;
    }
    return avg;
}

}  // namespace lmconv
