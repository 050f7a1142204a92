#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmconv/conv.hpp"
#include "lmconv/masks.hpp"
#include "lmconv/orders.hpp"
#include "lmconv/tensor.hpp"

namespace lmconv {

enum class HeadKind { Binary, LogisticMixture };

/// Architecture description. The network is a stem convolution under a
/// first-layer mask followed by depth-1 pre-activation residual layers
/// (h += conv(elu(norm(h)))) under deeper-layer masks, then norm, ELU and a
/// pointwise projection to per-pixel distribution parameters.
struct ModelConfig {
    int channels = 1;  // image channels (1 grayscale/binary, 3 color)
    int height = 0;
    int width = 0;
    int hidden = 64;
    int depth = 8;  // masked conv layers; dilations has one entry per layer
    int kernel = 3;
    std::vector<int> dilations;
    HeadKind head = HeadKind::Binary;
    int n_mix = 10;
    int bits = 8;  // intensity bit depth per channel (1 for binary data)
    bool mask_conditioning = false;
    double norm_eps = 1e-5;

    int levels() const { return 1 << bits; }
    int pixel_dims() const { return channels * height * width; }
    /// Distribution parameters emitted per pixel.
    int head_channels() const;
    void validate() const;

    static std::vector<int> default_dilations(int depth);
};

struct NamedTensor {
    std::string name;
    std::vector<int> dims;
    std::vector<double> values;

    size_t size() const { return values.size(); }
};

/// Ordered collection of uniquely named tensors; shapes are fixed by the
/// ModelConfig that created them.
struct Parameters {
    std::vector<NamedTensor> tensors;

    NamedTensor& at(const std::string& name);
    const NamedTensor& at(const std::string& name) const;
    bool has(const std::string& name) const;
    size_t total_size() const;
    /// Same names and shapes, all values zero.
    Parameters zeros_like() const;
};

/// Fan-in-scaled uniform conv weights, zero biases, unit gains, zero shifts.
/// Deterministic for a given seed.
Parameters init_parameters(const ModelConfig& config, uint64_t seed);

/// Per-layer masks compiled for one order (entry l drives conv layer l).
using LayerMasks = std::vector<const MaskMatrix*>;

LayerMasks masks_for_order(MaskCache& cache, const GenerationOrder& order,
                           const ModelConfig& config);

/// Saved activations from net_forward, consumed by net_backward.
struct ForwardTape {
    std::vector<ConvContext> conv_ctx;  // one per masked conv layer
    std::vector<Tensor4> norm_in;       // inputs of each channel_norm
    std::vector<Tensor4> elu_in;        // inputs of each ELU
    Tensor4 head_in;                    // features entering the head projection

    size_t retained_bytes() const;
};

/// Runs the stack; output is B x head_channels x H x W of raw distribution
/// parameters. Supply a tape to enable net_backward. store_patches selects
/// the patch-retaining conv backward over the recompute one.
Tensor4 net_forward(const ModelConfig& config, const Parameters& params, const Tensor4& x,
                    const LayerMasks& masks, ForwardTape* tape = nullptr,
                    bool store_patches = false);

/// Accumulates parameter gradients into `grads` (zeros_like layout) and, if
/// grad_x is non-null, writes the input gradient.
void net_backward(const ModelConfig& config, const Parameters& params, const ForwardTape& tape,
                  const Tensor4& grad_out, Parameters& grads, Tensor4* grad_x = nullptr);

/// Per-location normalization across channels with per-channel affine.
Tensor4 channel_norm(const Tensor4& x, const double* gain, const double* shift, double eps);
Tensor4 channel_norm_backward(const Tensor4& grad_out, const Tensor4& x, const double* gain,
                              double eps, double* grad_gain, double* grad_shift);

Tensor4 elu(const Tensor4& x);
Tensor4 elu_backward(const Tensor4& grad_out, const Tensor4& x);

/// Maps raw intensities 0..2^bits-1 to the [-1,1] network input scale.
Tensor4 rescale_to_unit(const Tensor4& raw, int bits);
double rescale_value(double raw, int bits);

}  // namespace lmconv
