#pragma once

#include <vector>

#include "lmconv/masks.hpp"
#include "lmconv/tensor.hpp"

namespace lmconv {

/// Non-owning view of one convolution layer's parameters.
/// weight is c_out x (c_in*k1*k2) row-major; mask_weight, when present, is
/// c_out x (k1*k2) and adds a mask-conditioning term to the pre-bias output.
struct ConvParams {
    const double* weight = nullptr;
    const double* bias = nullptr;
    const double* mask_weight = nullptr;
    int c_out = 0;
};

/// Mutable view with the same shapes; backward accumulates into these.
struct ConvGrads {
    double* weight = nullptr;
    double* bias = nullptr;
    double* mask_weight = nullptr;
    int c_out = 0;
};

/// What forward saves for backward. Recompute mode keeps only the layer
/// input and rebuilds the masked patch matrix during backward; store mode
/// additionally retains the per-batch patch matrices.
struct ConvContext {
    Tensor4 input;
    const MaskMatrix* mask = nullptr;
    bool stored_patches = false;
    std::vector<Matrix> patches;

    /// Bytes of float storage held between forward and backward.
    size_t retained_bytes() const;
};

/// Patch extraction for batch element b: column W*r+c holds the
/// (c_in*k1*k2)-entry receptive field of output location (r,c), with zeros
/// where the window leaves the image. Output stays H x W (stride 1).
Matrix im2col(const Tensor4& x, int b, int k1, int k2, int dilation, int pad_r, int pad_c);

/// Adjoint of im2col: scatter-adds columns back into grad_x for batch
/// element b, skipping pad positions.
void col2im_accumulate(const Matrix& cols, Tensor4& grad_x, int b, int k1, int k2, int dilation,
                       int pad_r, int pad_c);

/// y = col2im(W * (M .* im2col(pad(x)))) + b, plus W_M * M_block when mask
/// conditioning is enabled. Pass ctx to enable a later backward; with
/// store_patches=false the context keeps only x (patches are recomputed).
Tensor4 lmconv_forward(const Tensor4& x, const MaskMatrix& mask, const ConvParams& params,
                       ConvContext* ctx = nullptr, bool store_patches = false);

/// Accumulates parameter gradients into `grads` and returns grad_x.
/// grad_W = grad_Y * (M .* X)^T, grad_X = (W^T * grad_Y) .* M scattered via
/// col2im, grad_b = row sums of grad_Y.
Tensor4 lmconv_backward(const Tensor4& grad_y, const ConvContext& ctx, const ConvParams& params,
                        const ConvGrads& grads);

}  // namespace lmconv
