#include "lmconv/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace lmconv {

bool Tensor4::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor4::shape_str() const {
    return std::to_string(b_) + "x" + std::to_string(c_) + "x" + std::to_string(h_) + "x" +
           std::to_string(w_);
}

void require_finite(const Tensor4& t, const std::string& what) {
    if (!t.all_finite()) {
        throw NumericError("non-finite values in " + what + " (" + t.shape_str() + ")");
    }
}

void gemm_acc(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const double aip = arow[p];
            if (aip == 0.0) continue;
            const double* brow = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
}

void gemm_abt_acc(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

void gemm_atb_acc(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int p = 0; p < m; ++p) {
        const double* arow = a + static_cast<size_t>(p) * k;
        const double* brow = b + static_cast<size_t>(p) * n;
        for (int i = 0; i < k; ++i) {
            const double api = arow[i];
            if (api == 0.0) continue;
            double* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += api * brow[j];
        }
    }
}

}  // namespace lmconv
