#include "lmconv/conv.hpp"

#include <stdexcept>
#include <string>

namespace lmconv {

namespace {

void apply_mask(Matrix& patches, const MaskMatrix& mask) {
    const uint8_t* bits = mask.bits().data();
    double* x = patches.data.data();
    const size_t n = patches.size();
    for (size_t i = 0; i < n; ++i) x[i] *= static_cast<double>(bits[i]);
}

Matrix masked_patches(const Tensor4& x, int b, const MaskMatrix& mask) {
    const MaskMeta& m = mask.meta();
    const int pad_r = m.dilation * (m.k1 - 1) / 2;
    const int pad_c = m.dilation * (m.k2 - 1) / 2;
    Matrix patches = im2col(x, b, m.k1, m.k2, m.dilation, pad_r, pad_c);
    apply_mask(patches, mask);
    return patches;
}

Matrix mask_block_matrix(const MaskMatrix& mask) {
    Matrix block(mask.meta().patch_rows(), mask.cols());
    for (size_t i = 0; i < block.size(); ++i) {
        block.data[i] = static_cast<double>(mask.bits()[i]);
    }
    return block;
}

void check_forward_shapes(const Tensor4& x, const MaskMatrix& mask, const ConvParams& params) {
    const MaskMeta& m = mask.meta();
    if (x.channels() != m.c_in || x.height() != m.height || x.width() != m.width) {
        throw std::invalid_argument("lmconv: input " + x.shape_str() + " does not match mask " +
                                    std::to_string(m.c_in) + "ch " + std::to_string(m.height) +
                                    "x" + std::to_string(m.width));
    }
    if (params.c_out < 1 || params.weight == nullptr || params.bias == nullptr) {
        throw std::invalid_argument("lmconv: missing parameters");
    }
}

}  // namespace

size_t ConvContext::retained_bytes() const {
    size_t bytes = input.size() * sizeof(double);
    for (const Matrix& p : patches) bytes += p.size() * sizeof(double);
    return bytes;
}

Matrix im2col(const Tensor4& x, int b, int k1, int k2, int dilation, int pad_r, int pad_c) {
    const int c_in = x.channels();
    const int h = x.height();
    const int w = x.width();
    Matrix out(c_in * k1 * k2, h * w);
    for (int ci = 0; ci < c_in; ++ci) {
        for (int dr = 0; dr < k1; ++dr) {
            for (int dc = 0; dc < k2; ++dc) {
                double* dst = out.row((ci * k1 + dr) * k2 + dc);
                for (int r = 0; r < h; ++r) {
                    const int rr = r - pad_r + dilation * dr;
                    if (rr < 0 || rr >= h) {
                        dst += w;
                        continue;
                    }
                    for (int c = 0; c < w; ++c) {
                        const int cc = c - pad_c + dilation * dc;
                        *dst++ = (cc >= 0 && cc < w) ? x(b, ci, rr, cc) : 0.0;
                    }
                }
            }
        }
    }
    return out;
}

void col2im_accumulate(const Matrix& cols, Tensor4& grad_x, int b, int k1, int k2, int dilation,
                       int pad_r, int pad_c) {
    const int c_in = grad_x.channels();
    const int h = grad_x.height();
    const int w = grad_x.width();
    if (cols.rows != c_in * k1 * k2 || cols.cols != h * w) {
        throw std::invalid_argument("col2im: column matrix shape mismatch");
    }
    for (int ci = 0; ci < c_in; ++ci) {
        for (int dr = 0; dr < k1; ++dr) {
            for (int dc = 0; dc < k2; ++dc) {
                const double* src = cols.row((ci * k1 + dr) * k2 + dc);
                for (int r = 0; r < h; ++r) {
                    const int rr = r - pad_r + dilation * dr;
                    if (rr < 0 || rr >= h) {
                        src += w;
                        continue;
                    }
                    for (int c = 0; c < w; ++c) {
                        const int cc = c - pad_c + dilation * dc;
                        if (cc >= 0 && cc < w) grad_x(b, ci, rr, cc) += *src;
                        ++src;
                    }
                }
            }
        }
    }
}

Tensor4 lmconv_forward(const Tensor4& x, const MaskMatrix& mask, const ConvParams& params,
                       ConvContext* ctx, bool store_patches) {
    check_forward_shapes(x, mask, params);
    const MaskMeta& m = mask.meta();
    const int cols = m.cols();
    const int rows = m.rows();

    Matrix mask_block;
    if (params.mask_weight != nullptr) mask_block = mask_block_matrix(mask);

    Tensor4 y(x.batch(), params.c_out, m.height, m.width);
    if (ctx != nullptr) {
        ctx->mask = &mask;
        ctx->stored_patches = store_patches;
        ctx->patches.clear();
    }
    for (int b = 0; b < x.batch(); ++b) {
        Matrix patches = masked_patches(x, b, mask);
        double* yslice = y.data() + static_cast<size_t>(b) * params.c_out * cols;
        gemm_acc(params.weight, params.c_out, rows, patches.data.data(), cols, yslice);
        if (params.mask_weight != nullptr) {
            gemm_acc(params.mask_weight, params.c_out, m.patch_rows(), mask_block.data.data(),
                     cols, yslice);
        }
        for (int co = 0; co < params.c_out; ++co) {
            const double bias = params.bias[co];
            double* row = yslice + static_cast<size_t>(co) * cols;
            for (int j = 0; j < cols; ++j) row[j] += bias;
        }
        if (ctx != nullptr && store_patches) ctx->patches.push_back(std::move(patches));
    }
    if (ctx != nullptr) ctx->input = x;
    require_finite(y, "lmconv_forward output");
    return y;
}

Tensor4 lmconv_backward(const Tensor4& grad_y, const ConvContext& ctx, const ConvParams& params,
                        const ConvGrads& grads) {
    if (ctx.mask == nullptr || ctx.input.size() == 0) {
        throw std::invalid_argument("lmconv_backward: forward context missing");
    }
    const MaskMatrix& mask = *ctx.mask;
    const MaskMeta& m = mask.meta();
    if (grad_y.batch() != ctx.input.batch() || grad_y.channels() != params.c_out ||
        grad_y.height() != m.height || grad_y.width() != m.width) {
        throw std::invalid_argument("lmconv_backward: grad_y shape mismatch");
    }
    const int cols = m.cols();
    const int rows = m.rows();
    const int pad_r = m.dilation * (m.k1 - 1) / 2;
    const int pad_c = m.dilation * (m.k2 - 1) / 2;

    Matrix mask_block;
    if (params.mask_weight != nullptr) mask_block = mask_block_matrix(mask);

    Tensor4 grad_x(ctx.input.batch(), m.c_in, m.height, m.width);
    Matrix gx_cols(rows, cols);
    for (int b = 0; b < grad_y.batch(); ++b) {
        const double* gy = grad_y.data() + static_cast<size_t>(b) * params.c_out * cols;

        if (ctx.stored_patches) {
            const Matrix& patches = ctx.patches[static_cast<size_t>(b)];
            gemm_abt_acc(gy, params.c_out, cols, patches.data.data(), rows, grads.weight);
        } else {
            // Recomputes im2col + masking instead of retaining the patch
            // matrix across the forward/backward gap.
            const Matrix patches = masked_patches(ctx.input, b, mask);
            gemm_abt_acc(gy, params.c_out, cols, patches.data.data(), rows, grads.weight);
        }
        for (int co = 0; co < params.c_out; ++co) {
            const double* row = gy + static_cast<size_t>(co) * cols;
            double acc = 0.0;
            for (int j = 0; j < cols; ++j) acc += row[j];
            grads.bias[co] += acc;
        }
        if (params.mask_weight != nullptr) {
            gemm_abt_acc(gy, params.c_out, cols, mask_block.data.data(), m.patch_rows(),
                         grads.mask_weight);
        }

        gx_cols.zero();
        gemm_atb_acc(params.weight, params.c_out, rows, gy, cols, gx_cols.data.data());
        apply_mask(gx_cols, mask);
        col2im_accumulate(gx_cols, grad_x, b, m.k1, m.k2, m.dilation, pad_r, pad_c);
    }
    return grad_x;
}

}  // namespace lmconv
