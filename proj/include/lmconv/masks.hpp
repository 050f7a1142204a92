#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "lmconv/orders.hpp"

namespace lmconv {

struct MaskMeta {
    int k1 = 0;
    int k2 = 0;
    int dilation = 1;
    int c_in = 0;
    int height = 0;
    int width = 0;
    bool first_layer = false;
    uint64_t order_id = 0;

    int patch_rows() const { return k1 * k2; }
    int rows() const { return c_in * k1 * k2; }
    int cols() const { return height * width; }
};

/// Binary matrix gating each patch entry at each output location. Rows are
/// C_in repeated blocks of k1*k2 kernel offsets (offset (dr,dc) at block row
/// k2*dr+dc); column W*r+c holds the gate for output location (r,c). Stored
/// as one byte per bit to keep the GEMM-side multiply branch-free.
class MaskMatrix {
  public:
    MaskMatrix(MaskMeta meta, std::vector<uint8_t> bits);

    const MaskMeta& meta() const { return meta_; }
    int rows() const { return meta_.rows(); }
    int cols() const { return meta_.cols(); }

    uint8_t bit(int row, int col) const {
        return bits_[static_cast<size_t>(row) * meta_.cols() + col];
    }
    const std::vector<uint8_t>& bits() const { return bits_; }
    const uint8_t* row(int r) const { return bits_.data() + static_cast<size_t>(r) * meta_.cols(); }

    /// All-ones mask (the unmasked-convolution case).
    static MaskMatrix dense(int c_in, int k1, int k2, int dilation, int height, int width);

  private:
    MaskMeta meta_;
    std::vector<uint8_t> bits_;
};

/// Compiles the order into a mask. For the first layer a bit is set iff the
/// referenced in-image input cell strictly precedes the output cell in the
/// order; deeper layers additionally get an all-ones center row so features
/// at the output location itself stay visible. Bits referencing pad cells
/// are always zero. Kernel dims must be odd.
MaskMatrix build_mask_matrix(const GenerationOrder& order, int c_in, int k1, int k2,
                             int dilation, bool first_layer);

/// Write-once-read-many store keyed by (order, layer kind, kernel, dilation,
/// channel count). get() compiles on miss; returned references stay valid
/// for the cache lifetime.
class MaskCache {
  public:
    const MaskMatrix& get(const GenerationOrder& order, int c_in, int k1, int k2, int dilation,
                          bool first_layer);
    size_t entries() const;

  private:
    using Key = std::tuple<uint64_t, bool, int, int, int, int>;
    mutable std::mutex mu_;
    std::map<Key, MaskMatrix> entries_;
};

/// Boolean (H*W)x(H*W) reachability over order positions: at(i,j) is true
/// iff the output for the i-th generated cell can depend on the input at the
/// j-th generated cell. Rows are packed bitsets.
class Reachability {
  public:
    explicit Reachability(int n);

    int size() const { return n_; }
    bool at(int i, int j) const {
        return (rows_[static_cast<size_t>(i) * words_ + static_cast<size_t>(j) / 64] >>
                (static_cast<size_t>(j) % 64)) & 1u;
    }
    void set(int i, int j) {
        rows_[static_cast<size_t>(i) * words_ + static_cast<size_t>(j) / 64] |=
            uint64_t{1} << (static_cast<size_t>(j) % 64);
    }
    const uint64_t* row(int i) const { return rows_.data() + static_cast<size_t>(i) * words_; }
    uint64_t* row(int i) { return rows_.data() + static_cast<size_t>(i) * words_; }
    size_t words_per_row() const { return words_; }

  private:
    int n_;
    size_t words_;
    std::vector<uint64_t> rows_;
};

/// Composes per-layer mask adjacency: layer 0 uses first-layer semantics,
/// the rest deeper-layer semantics; dilation_schedule supplies one dilation
/// per layer and its length is the depth.
Reachability receptive_field_closure(const GenerationOrder& order, int k1, int k2,
                                     const std::vector<int>& dilation_schedule);

/// Binary dump, magic "LMCM": header fields then row-major bytes.
void save_mask(const MaskMatrix& mask, const std::string& path);
MaskMatrix load_mask(const std::string& path);

}  // namespace lmconv
