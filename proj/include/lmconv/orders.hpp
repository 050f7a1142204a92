#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace lmconv {

/// Grid cell, row-major addressing: row in [0,H), col in [0,W).
struct Coord {
    int row = 0;
    int col = 0;

    friend bool operator==(const Coord& a, const Coord& b) {
        return a.row == b.row && a.col == b.col;
    }
    friend bool operator!=(const Coord& a, const Coord& b) { return !(a == b); }
};

/// A permutation of the H*W grid cells. Defines which cell is generated at
/// each step and, through index_of(), the inverse map. Immutable once built;
/// safe to share across threads.
class GenerationOrder {
  public:
    GenerationOrder(int height, int width, std::vector<Coord> sequence);

    int height() const { return height_; }
    int width() const { return width_; }
    int size() const { return static_cast<int>(sequence_.size()); }

    const std::vector<Coord>& sequence() const { return sequence_; }
    const Coord& at(int i) const { return sequence_[static_cast<size_t>(i)]; }

    /// Position of `c` in the sequence. Throws std::invalid_argument if out
    /// of bounds for this grid.
    int index_of(Coord c) const;

    /// Content hash; equal orders share ids. Used as a mask-cache key.
    uint64_t id() const { return id_; }

    friend bool operator==(const GenerationOrder& a, const GenerationOrder& b) {
        return a.height_ == b.height_ && a.width_ == b.width_ && a.sequence_ == b.sequence_;
    }

  private:
    int height_;
    int width_;
    std::vector<Coord> sequence_;
    std::vector<int> inverse_;  // cell (r,c) -> position, indexed W*r+c
    uint64_t id_;
};

/// Cells already known at completion time, as a bitmap over the grid.
struct ObservedSet {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> bitmap;  // size H*W, 1 = observed, indexed W*r+c

    ObservedSet() = default;
    ObservedSet(int h, int w) : height(h), width(w), bitmap(static_cast<size_t>(h) * w, 0) {}

    bool observed(int r, int c) const { return bitmap[static_cast<size_t>(r) * width + c] != 0; }
    void set(int r, int c, bool v = true) { bitmap[static_cast<size_t>(r) * width + c] = v ? 1 : 0; }
    int count() const;
};

/// Row-major traversal, top-left first.
GenerationOrder raster_order(int height, int width);

/// Serpentine traversal. The eight variants are start corner x serpentine
/// axis: variant = corner*2 + axis with corner 0..3 = TL,TR,BL,BR and axis
/// 0 = along rows, 1 = along columns. Consecutive cells are 4-neighbors.
GenerationOrder s_curve_order(int height, int width, int variant);

/// Generalized Hilbert traversal, valid for non-power-of-two rectangles.
/// Consecutive cells are 4-neighbors.
GenerationOrder hilbert_order(int height, int width);

/// Order whose first |observed| entries enumerate exactly the observed cells
/// and whose remainder enumerates the complement; within each segment cells
/// keep the relative order of s_curve_order(fill_variant).
GenerationOrder max_context_order(const ObservedSet& observed, int fill_variant = 0);

GenerationOrder reverse(const GenerationOrder& order);

/// Plain-text format: first line "H W", then H*W lines "r c".
void save_order(const GenerationOrder& order, std::ostream& out);
void save_order(const GenerationOrder& order, const std::string& path);
GenerationOrder load_order(std::istream& in);
GenerationOrder load_order(const std::string& path);

}  // namespace lmconv
