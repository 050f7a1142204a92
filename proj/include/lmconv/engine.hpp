#pragma once

#include <random>
#include <vector>

#include "lmconv/likelihood.hpp"
#include "lmconv/net.hpp"

namespace lmconv {

struct TrainConfig {
    std::vector<GenerationOrder> orders;  // drawn uniformly, one per step
    int batch_size = 32;
    double lr = 2e-4;
    double lr_decay = 1.0 - 5e-6;  // multiplicative, applied per iteration
    double clip_norm = 2e6;        // global-norm gradient clip
    int epochs = 1;
    uint64_t seed = 0;
    int avg_window = 0;  // >0: average parameters over the trailing checkpoints
};

/// Adam moments, shapes mirroring the Parameters they update.
struct OptimizerState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    int64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerState like(const Parameters& params);
};

struct StepResult {
    double loss = 0.0;  // mean per-image NLL (nats) under the drawn order
    int order_index = 0;
    double grad_norm = 0.0;
    double lr = 0.0;
};

/// One optimization step on `batch_raw`: draw an order uniformly from the
/// training set, backprop the NLL under it, clip by global norm, apply Adam
/// with the decayed learning rate. Throws NumericError (leaving params
/// untouched) when the loss or gradients go non-finite.
StepResult train_step(const ModelConfig& config, Parameters& params, OptimizerState& opt,
                      MaskCache& cache, const TrainConfig& train, const Tensor4& batch_raw,
                      std::mt19937_64& rng);

/// Ancestral sampling: one forward pass per pixel, drawing pixel i from its
/// conditional given everything sampled before it in the order. Returns the
/// raw image; accumulated_log_prob, when given, receives the model log
/// probability of the produced image.
Tensor4 sample(const ModelConfig& config, const Parameters& params, MaskCache& cache,
               const GenerationOrder& order, std::mt19937_64& rng, double temperature = 1.0,
               double* accumulated_log_prob = nullptr);

/// Copies the observed pixels of image_raw, zeroes the hidden region in the
/// model input, and samples the hidden pixels along the order suffix. The
/// order prefix must equal the observed set.
Tensor4 complete(const ModelConfig& config, const Parameters& params, MaskCache& cache,
                 const Tensor4& image_raw, const ObservedSet& observed,
                 const GenerationOrder& order, std::mt19937_64& rng, double temperature = 1.0);

/// Sum of per-pixel NLL over the hidden region only, with each hidden pixel
/// conditioned per the order (observed and earlier hidden pixels take their
/// true values). Works for any order, not just max-context ones.
double conditional_nll(const ModelConfig& config, const Parameters& params, MaskCache& cache,
                       const Tensor4& image_raw, const ObservedSet& observed,
                       const GenerationOrder& order);

/// Arithmetic mean per tensor across homogeneous parameter sets.
Parameters average_parameters(const std::vector<Parameters>& checkpoints);

/// Global L2 norm across every tensor in the set.
double global_norm(const Parameters& grads);

}  // namespace lmconv
