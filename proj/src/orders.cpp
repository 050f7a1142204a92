#include "lmconv/orders.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lmconv {

namespace {

void check_dims(int height, int width) {
    if (height < 1 || width < 1) {
        throw std::invalid_argument("grid dimensions must be positive, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
}

uint64_t hash_sequence(int height, int width, const std::vector<Coord>& seq) {
    // FNV-1a over the cell indices.
    uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ULL;
    };
    mix(static_cast<uint64_t>(height));
    mix(static_cast<uint64_t>(width));
    for (const Coord& c : seq) {
        mix(static_cast<uint64_t>(c.row) * static_cast<uint64_t>(width) +
            static_cast<uint64_t>(c.col));
    }
    return h;
}

int sgn(int v) { return v < 0 ? -1 : (v > 0 ? 1 : 0); }

// Generalized Hilbert curve over a rectangle. Walks the block spanned by
// major axis vector (ax,ay) and orthogonal vector (bx,by) starting at (x,y),
// in grid steps, appending (x=col, y=row) cells to `out`.
void gilbert(int x, int y, int ax, int ay, int bx, int by, std::vector<Coord>& out) {
    const int w = std::abs(ax + ay);
    const int h = std::abs(bx + by);

    const int dax = sgn(ax), day = sgn(ay);
    const int dbx = sgn(bx), dby = sgn(by);

    if (h == 1) {
        for (int i = 0; i < w; ++i) {
            out.push_back({y, x});
            x += dax;
            y += day;
        }
        return;
    }
    if (w == 1) {
        for (int i = 0; i < h; ++i) {
            out.push_back({y, x});
            x += dbx;
            y += dby;
        }
        return;
    }

    // Floor-halving (round toward -inf) keeps subblock vectors aligned with
    // the parents even when components are negative.
    auto half = [](int v) { return (v - (v < 0 ? 1 : 0)) / 2; };
    int ax2 = half(ax), ay2 = half(ay);
    int bx2 = half(bx), by2 = half(by);

    const int w2 = std::abs(ax2 + ay2);
    const int h2 = std::abs(bx2 + by2);

    if (2 * w > 3 * h) {
        if ((w2 % 2) != 0 && w > 2) {
            ax2 += dax;
            ay2 += day;
        }
        // Long block: split along the major axis only.
        gilbert(x, y, ax2, ay2, bx, by, out);
        gilbert(x + ax2, y + ay2, ax - ax2, ay - ay2, bx, by, out);
    } else {
        if ((h2 % 2) != 0 && h > 2) {
            bx2 += dbx;
            by2 += dby;
        }
        // Step sideways, sweep the major axis, step back.
        gilbert(x, y, bx2, by2, ax2, ay2, out);
        gilbert(x + bx2, y + by2, ax, ay, bx - bx2, by - by2, out);
        gilbert(x + (ax - dax) + (bx2 - dbx), y + (ay - day) + (by2 - dby),
                -bx2, -by2, -(ax - ax2), -(ay - ay2), out);
    }
}

}  // namespace

GenerationOrder::GenerationOrder(int height, int width, std::vector<Coord> sequence)
    : height_(height), width_(width), sequence_(std::move(sequence)) {
    check_dims(height, width);
    const size_t cells = static_cast<size_t>(height) * static_cast<size_t>(width);
    if (sequence_.size() != cells) {
        throw std::invalid_argument("order sequence has " + std::to_string(sequence_.size()) +
                                    " entries, grid has " + std::to_string(cells));
    }
    inverse_.assign(cells, -1);
    for (size_t i = 0; i < sequence_.size(); ++i) {
        const Coord& c = sequence_[i];
        if (c.row < 0 || c.row >= height || c.col < 0 || c.col >= width) {
            throw std::invalid_argument("order cell out of bounds at position " + std::to_string(i));
        }
        const size_t cell = static_cast<size_t>(c.row) * width + c.col;
        if (inverse_[cell] != -1) {
            throw std::invalid_argument("order visits cell twice at position " + std::to_string(i));
        }
        inverse_[cell] = static_cast<int>(i);
    }
    id_ = hash_sequence(height, width, sequence_);
}

int GenerationOrder::index_of(Coord c) const {
    if (c.row < 0 || c.row >= height_ || c.col < 0 || c.col >= width_) {
        throw std::invalid_argument("coordinate (" + std::to_string(c.row) + "," +
                                    std::to_string(c.col) + ") out of bounds");
    }
    return inverse_[static_cast<size_t>(c.row) * width_ + c.col];
}

int ObservedSet::count() const {
    int n = 0;
    for (uint8_t b : bitmap) n += b != 0;
    return n;
}

GenerationOrder raster_order(int height, int width) {
    check_dims(height, width);
    std::vector<Coord> seq;
    seq.reserve(static_cast<size_t>(height) * width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) seq.push_back({r, c});
    return {height, width, std::move(seq)};
}

GenerationOrder s_curve_order(int height, int width, int variant) {
    check_dims(height, width);
    if (variant < 0 || variant >= 8) {
        throw std::invalid_argument("s-curve variant must be in [0,8), got " +
                                    std::to_string(variant));
    }
    const int corner = variant / 2;           // 0 TL, 1 TR, 2 BL, 3 BR
    const bool along_cols = (variant % 2) != 0;
    const bool from_bottom = corner >= 2;
    const bool from_right = (corner % 2) != 0;

    std::vector<Coord> seq;
    seq.reserve(static_cast<size_t>(height) * width);
    if (!along_cols) {
        for (int i = 0; i < height; ++i) {
            const int r = from_bottom ? height - 1 - i : i;
            const bool rev = (i % 2 != 0) != from_right;
            for (int j = 0; j < width; ++j) {
                seq.push_back({r, rev ? width - 1 - j : j});
            }
        }
    } else {
        for (int i = 0; i < width; ++i) {
            const int c = from_right ? width - 1 - i : i;
            const bool rev = (i % 2 != 0) != from_bottom;
            for (int j = 0; j < height; ++j) {
                seq.push_back({rev ? height - 1 - j : j, c});
            }
        }
    }
    return {height, width, std::move(seq)};
}

GenerationOrder hilbert_order(int height, int width) {
    check_dims(height, width);
    std::vector<Coord> seq;
    seq.reserve(static_cast<size_t>(height) * width);
    // A corner-to-corner sweep along the major axis exists only when the
    // major length is even or the minor length is odd; pick the orientation
    // accordingly (larger side first when both work).
    bool major_x = width >= height;
    {
        const int w = major_x ? width : height;
        const int h = major_x ? height : width;
        if (w % 2 != 0 && h % 2 == 0) major_x = !major_x;
    }
    if (major_x) {
        gilbert(0, 0, width, 0, 0, height, seq);
    } else {
        gilbert(0, 0, 0, height, width, 0, seq);
    }
    return {height, width, std::move(seq)};
}

GenerationOrder max_context_order(const ObservedSet& observed, int fill_variant) {
    const GenerationOrder fill = s_curve_order(observed.height, observed.width, fill_variant);
    std::vector<Coord> seq;
    seq.reserve(fill.sequence().size());
    for (const Coord& c : fill.sequence()) {
        if (observed.observed(c.row, c.col)) seq.push_back(c);
    }
    for (const Coord& c : fill.sequence()) {
        if (!observed.observed(c.row, c.col)) seq.push_back(c);
    }
    return {observed.height, observed.width, std::move(seq)};
}

GenerationOrder reverse(const GenerationOrder& order) {
    std::vector<Coord> seq(order.sequence().rbegin(), order.sequence().rend());
    return {order.height(), order.width(), std::move(seq)};
}

void save_order(const GenerationOrder& order, std::ostream& out) {
    out << order.height() << " " << order.width() << "\n";
    for (const Coord& c : order.sequence()) {
        out << c.row << " " << c.col << "\n";
    }
}

void save_order(const GenerationOrder& order, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open order file for writing: " + path);
    save_order(order, out);
}

GenerationOrder load_order(std::istream& in) {
    int h = 0, w = 0;
    if (!(in >> h >> w)) throw std::runtime_error("order file: missing dimension header");
    check_dims(h, w);
    std::vector<Coord> seq;
    seq.reserve(static_cast<size_t>(h) * w);
    for (long i = 0; i < static_cast<long>(h) * w; ++i) {
        Coord c;
        if (!(in >> c.row >> c.col)) {
            throw std::runtime_error("order file: truncated at entry " + std::to_string(i));
        }
        seq.push_back(c);
    }
    return {h, w, std::move(seq)};
}

GenerationOrder load_order(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open order file: " + path);
    return load_order(in);
}

}  // namespace lmconv
