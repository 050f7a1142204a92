#include "lmconv/masks.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace lmconv {

namespace {

void check_kernel(int k1, int k2, int dilation) {
    if (k1 < 1 || k2 < 1 || k1 % 2 == 0 || k2 % 2 == 0) {
        throw std::invalid_argument("kernel dims must be odd and positive, got " +
                                    std::to_string(k1) + "x" + std::to_string(k2));
    }
    if (dilation < 1) {
        throw std::invalid_argument("dilation must be >= 1, got " + std::to_string(dilation));
    }
}

}  // namespace

MaskMatrix::MaskMatrix(MaskMeta meta, std::vector<uint8_t> bits)
    : meta_(meta), bits_(std::move(bits)) {
    if (bits_.size() != static_cast<size_t>(meta_.rows()) * meta_.cols()) {
        throw std::invalid_argument("mask bits size does not match meta dims");
    }
    for (uint8_t b : bits_) {
        if (b > 1) throw std::invalid_argument("mask bits must be 0 or 1");
    }
}

MaskMatrix MaskMatrix::dense(int c_in, int k1, int k2, int dilation, int height, int width) {
    check_kernel(k1, k2, dilation);
    MaskMeta meta{k1, k2, dilation, c_in, height, width, false, 0};
    return {meta, std::vector<uint8_t>(static_cast<size_t>(meta.rows()) * meta.cols(), 1)};
}

MaskMatrix build_mask_matrix(const GenerationOrder& order, int c_in, int k1, int k2,
                             int dilation, bool first_layer) {
    check_kernel(k1, k2, dilation);
    if (c_in < 1) throw std::invalid_argument("c_in must be >= 1");
    const int h = order.height();
    const int w = order.width();
    const int patch_rows = k1 * k2;
    const int cols = h * w;

    // One k1*k2 block; repeated C_in times below.
    std::vector<uint8_t> block(static_cast<size_t>(patch_rows) * cols, 0);
    std::vector<uint8_t> generated(static_cast<size_t>(cols), 0);

    for (const Coord& out : order.sequence()) {
        const int col = w * out.row + out.col;
        for (int dr = 0; dr < k1; ++dr) {
            const int rr = out.row + dilation * (dr - k1 / 2);
            if (rr < 0 || rr >= h) continue;
            for (int dc = 0; dc < k2; ++dc) {
                const int cc = out.col + dilation * (dc - k2 / 2);
                if (cc < 0 || cc >= w) continue;
                if (generated[static_cast<size_t>(rr) * w + cc]) {
                    block[static_cast<size_t>(k2 * dr + dc) * cols + col] = 1;
                }
            }
        }
        generated[static_cast<size_t>(col)] = 1;
    }

    if (!first_layer) {
        const int center = patch_rows / 2;
        std::fill_n(block.begin() + static_cast<size_t>(center) * cols, cols, uint8_t{1});
    }

    std::vector<uint8_t> bits(static_cast<size_t>(c_in) * patch_rows * cols);
    for (int b = 0; b < c_in; ++b) {
        std::memcpy(bits.data() + static_cast<size_t>(b) * block.size(), block.data(),
                    block.size());
    }

    MaskMeta meta{k1, k2, dilation, c_in, h, w, first_layer, order.id()};
    return {meta, std::move(bits)};
}

const MaskMatrix& MaskCache::get(const GenerationOrder& order, int c_in, int k1, int k2,
                                 int dilation, bool first_layer) {
    const Key key{order.id(), first_layer, c_in, k1, k2, dilation};
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        it = entries_.emplace(key, build_mask_matrix(order, c_in, k1, k2, dilation, first_layer))
                 .first;
    }
    return it->second;
}

size_t MaskCache::entries() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

Reachability::Reachability(int n)
    : n_(n), words_((static_cast<size_t>(n) + 63) / 64),
      rows_(static_cast<size_t>(n) * words_, 0) {}

Reachability receptive_field_closure(const GenerationOrder& order, int k1, int k2,
                                     const std::vector<int>& dilation_schedule) {
    if (dilation_schedule.empty()) {
        throw std::invalid_argument("dilation schedule must have at least one layer");
    }
    const int h = order.height();
    const int w = order.width();
    const int n = h * w;

    // Adjacency of one layer in order-position space: pos_adj[i] lists the
    // positions j whose cells the mask lets position i read.
    auto layer_positions = [&](int dilation, bool first_layer) {
        const MaskMatrix mask = build_mask_matrix(order, 1, k1, k2, dilation, first_layer);
        std::vector<std::vector<int>> adj(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            const Coord out = order.at(i);
            const int col = w * out.row + out.col;
            for (int dr = 0; dr < k1; ++dr) {
                const int rr = out.row + dilation * (dr - k1 / 2);
                if (rr < 0 || rr >= h) continue;
                for (int dc = 0; dc < k2; ++dc) {
                    const int cc = out.col + dilation * (dc - k2 / 2);
                    if (cc < 0 || cc >= w) continue;
                    if (mask.bit(k2 * dr + dc, col)) {
                        adj[static_cast<size_t>(i)].push_back(order.index_of({rr, cc}));
                    }
                }
            }
        }
        return adj;
    };

    Reachability reach(n);
    {
        const auto adj = layer_positions(dilation_schedule[0], true);
        for (int i = 0; i < n; ++i) {
            for (int j : adj[static_cast<size_t>(i)]) reach.set(i, j);
        }
    }
    const size_t words = reach.words_per_row();
    for (size_t layer = 1; layer < dilation_schedule.size(); ++layer) {
        const auto adj = layer_positions(dilation_schedule[layer], false);
        Reachability next(n);
        for (int i = 0; i < n; ++i) {
            uint64_t* dst = next.row(i);
            for (int m : adj[static_cast<size_t>(i)]) {
                const uint64_t* src = reach.row(m);
                for (size_t t = 0; t < words; ++t) dst[t] |= src[t];
            }
        }
        reach = std::move(next);
    }
    return reach;
}

namespace {

constexpr char kMaskMagic[4] = {'L', 'M', 'C', 'M'};
constexpr uint32_t kMaskVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) {
        throw std::runtime_error("mask file: truncated header");
    }
    return static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
           (static_cast<uint32_t>(buf[2]) << 16) | (static_cast<uint32_t>(buf[3]) << 24);
}

}  // namespace

void save_mask(const MaskMatrix& mask, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open mask file for writing: " + path);
    out.write(kMaskMagic, 4);
    write_u32(out, kMaskVersion);
    const MaskMeta& m = mask.meta();
    write_u32(out, static_cast<uint32_t>(m.k1));
    write_u32(out, static_cast<uint32_t>(m.k2));
    write_u32(out, static_cast<uint32_t>(m.dilation));
    write_u32(out, static_cast<uint32_t>(m.c_in));
    write_u32(out, static_cast<uint32_t>(m.height));
    write_u32(out, static_cast<uint32_t>(m.width));
    out.put(m.first_layer ? 1 : 0);
    out.write(reinterpret_cast<const char*>(mask.bits().data()),
              static_cast<std::streamsize>(mask.bits().size()));
    if (!out) throw std::runtime_error("mask file write failed: " + path);
}

MaskMatrix load_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mask file: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMaskMagic, 4) != 0) {
        throw std::runtime_error("mask file: bad magic");
    }
    const uint32_t version = read_u32(in);
    if (version != kMaskVersion) {
        throw std::runtime_error("mask file: unsupported version " + std::to_string(version));
    }
    MaskMeta meta;
    meta.k1 = static_cast<int>(read_u32(in));
    meta.k2 = static_cast<int>(read_u32(in));
    meta.dilation = static_cast<int>(read_u32(in));
    meta.c_in = static_cast<int>(read_u32(in));
    meta.height = static_cast<int>(read_u32(in));
    meta.width = static_cast<int>(read_u32(in));
    const int flag = in.get();
    if (flag != 0 && flag != 1) throw std::runtime_error("mask file: bad layer flag");
    meta.first_layer = flag == 1;
    std::vector<uint8_t> bits(static_cast<size_t>(meta.rows()) * meta.cols());
    if (!in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()))) {
        throw std::runtime_error("mask file: truncated payload in " + path);
    }
    return {meta, std::move(bits)};
}

}  // namespace lmconv
