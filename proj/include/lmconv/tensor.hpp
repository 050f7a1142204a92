#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace lmconv {

/// Dense row-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), 0.0); }
};

/// Dense B x C x H x W tensor of doubles, contiguous row-major.
class Tensor4 {
  public:
    Tensor4() = default;
    Tensor4(int b, int c, int h, int w)
        : b_(b), c_(c), h_(h), w_(w),
          data_(static_cast<size_t>(b) * c * h * w, 0.0) {}

    int batch() const { return b_; }
    int channels() const { return c_; }
    int height() const { return h_; }
    int width() const { return w_; }
    size_t size() const { return data_.size(); }

    double& operator()(int b, int c, int h, int w) {
        return data_[((static_cast<size_t>(b) * c_ + c) * h_ + h) * w_ + w];
    }
    double operator()(int b, int c, int h, int w) const {
        return data_[((static_cast<size_t>(b) * c_ + c) * h_ + h) * w_ + w];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }
    bool same_shape(const Tensor4& o) const {
        return b_ == o.b_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
    }
    bool all_finite() const;
    std::string shape_str() const;

  private:
    int b_ = 0, c_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

/// Throws NumericError if any element is non-finite. `what` names the
/// producing operation in the message.
void require_finite(const Tensor4& t, const std::string& what);

// Row-major GEMM kernels with deterministic (fixed loop nest) accumulation.
/// c[m x n] += a[m x k] * b[k x n]
void gemm_acc(const double* a, int m, int k, const double* b, int n, double* c);
/// c[m x n] += a[m x k] * b[n x k]^T
void gemm_abt_acc(const double* a, int m, int k, const double* b, int n, double* c);
/// c[k x n] += a[m x k]^T * b[m x n]
void gemm_atb_acc(const double* a, int m, int k, const double* b, int n, double* c);

/// Raised when an operation produces NaN/Inf or a training step diverges.
class NumericError : public std::exception {
  public:
    explicit NumericError(std::string msg) : msg_(std::move(msg)) {}
    const char* what() const noexcept override { return msg_.c_str(); }

  private:
    std::string msg_;
};

}  // namespace lmconv
