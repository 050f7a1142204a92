#pragma once

#include <random>
#include <vector>

#include "lmconv/net.hpp"

namespace lmconv {

// Stable scalar helpers shared by the heads.
double softplus(double z);
double log_sigmoid(double z);
double sigmoid(double z);
double log_sum_exp(const double* v, int n);

/// log softmax(logit0, logit1)[v], v in {0,1}.
double binary_log_prob(double logit0, double logit1, int v);

/// Discretized logistic mixture log-probability of intensity v in
/// [0, 2^bits) for one channel. Inputs are raw head outputs: mixture weight
/// logits, means on the [-1,1] scale and log-scales (clamped at -7 at use).
/// Edge bins integrate the tails, so the distribution sums to one exactly.
double dlm_log_prob(const double* weight_logits, const double* means, const double* log_scales,
                    int n_mix, int v, int bits);

/// Negative log-likelihood of the values at one pixel (all channels jointly)
/// under the head output. If grad is non-null, adds scale * d(nll)/d(params)
/// into the matching pixel of grad.
double pixel_nll(const ModelConfig& config, const Tensor4& head_out, const Tensor4& raw, int b,
                 int r, int c, Tensor4* grad = nullptr, double scale = 1.0);

/// Per-image NLL (nats) of a raw batch under head outputs; accumulates the
/// head-output gradient of (scale * total nll) when grad is non-null.
std::vector<double> head_nll(const ModelConfig& config, const Tensor4& head_out,
                             const Tensor4& raw, Tensor4* grad = nullptr, double scale = 1.0);

/// Draws the pixel at (r,c) from its conditional, writes the raw values into
/// `raw` and returns the model log-probability (untempered) of the draw.
double sample_pixel(const ModelConfig& config, const Tensor4& head_out, Tensor4& raw, int b,
                    int r, int c, std::mt19937_64& rng, double temperature = 1.0);

/// One forward pass; per-image joint NLL in nats under the given order.
std::vector<double> joint_nll(const ModelConfig& config, const Parameters& params,
                              MaskCache& cache, const GenerationOrder& order,
                              const Tensor4& raw_batch);

/// -log((1/K) sum_k exp(-nll_k)) per image, log-sum-exp stabilized.
std::vector<double> ensemble_nll(const ModelConfig& config, const Parameters& params,
                                 MaskCache& cache, const std::vector<GenerationOrder>& orders,
                                 const Tensor4& raw_batch);

/// NLL per image of a head forced to the uniform distribution over
/// 2^bits intensity levels.
double uniform_head_nll(const ModelConfig& config);

double bits_per_dim(double nats, const ModelConfig& config);

}  // namespace lmconv
