// Test-only reference implementations, kept independent of the library's
// GEMM/im2col path so the two can disagree.
#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "lmconv/conv.hpp"
#include "lmconv/masks.hpp"
#include "lmconv/tensor.hpp"

namespace oracle {

// Per-output-location masked dot product, looping the kernel window
// directly. bias/mask_weight handling mirrors the layer contract.
inline lmconv::Tensor4 direct_masked_conv(const lmconv::Tensor4& x, const lmconv::MaskMatrix& mask,
                                          const lmconv::ConvParams& params) {
    const lmconv::MaskMeta& m = mask.meta();
    const int h = m.height, w = m.width, d = m.dilation;
    lmconv::Tensor4 y(x.batch(), params.c_out, h, w);
    for (int b = 0; b < x.batch(); ++b) {
        for (int co = 0; co < params.c_out; ++co) {
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    double acc = params.bias[co];
                    const int col = w * r + c;
                    for (int ci = 0; ci < m.c_in; ++ci) {
                        for (int dr = 0; dr < m.k1; ++dr) {
                            for (int dc = 0; dc < m.k2; ++dc) {
                                const int rr = r + d * (dr - m.k1 / 2);
                                const int cc = c + d * (dc - m.k2 / 2);
                                if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
                                const int row = (ci * m.k1 + dr) * m.k2 + dc;
                                if (!mask.bit(row, col)) continue;
                                acc += params.weight[static_cast<size_t>(co) * m.rows() + row] *
                                       x(b, ci, rr, cc);
                            }
                        }
                    }
                    if (params.mask_weight != nullptr) {
                        for (int off = 0; off < m.patch_rows(); ++off) {
                            acc += params.mask_weight[static_cast<size_t>(co) * m.patch_rows() +
                                                      off] *
                                   static_cast<double>(mask.bit(off, col));
                        }
                    }
                    y(b, co, r, c) = acc;
                }
            }
        }
    }
    return y;
}

inline void fill_uniform(lmconv::Tensor4& t, std::mt19937_64& rng, double lo = -1.0,
                         double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (size_t i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
}

inline void fill_uniform(std::vector<double>& v, std::mt19937_64& rng, double lo = -1.0,
                         double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : v) x = dist(rng);
}

inline double max_abs_diff(const lmconv::Tensor4& a, const lmconv::Tensor4& b) {
    double worst = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
    }
    return worst;
}

// Gradient checks need a generic parameter point: with zero biases the stem
// output at the first generated pixel is constant across channels, variance
// under the channel norm collapses to eps, and finite differences lose
// accuracy to the curvature spike.
template <typename Params>
void jitter_parameters(Params& params, std::mt19937_64& rng, double scale = 0.25) {
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (auto& tensor : params.tensors) {
        for (double& v : tensor.values) v += dist(rng);
    }
}

}  // namespace oracle
