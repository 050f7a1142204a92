#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "lmconv/masks.hpp"

using namespace lmconv;

TEST_CASE("raster 3x3 first-layer mask at the center matches the classic pattern") {
    // Hand trace: at output (1,1) the generated predecessors are
    // (0,0),(0,1),(0,2),(1,0) -> patch rows 0..3 set, the rest clear.
    const MaskMatrix mask = build_mask_matrix(raster_order(3, 3), 1, 3, 3, 1, true);
    const int col = 3 * 1 + 1;
    for (int row = 0; row < 9; ++row) {
        CHECK(mask.bit(row, col) == (row <= 3 ? 1 : 0));
    }
}

TEST_CASE("first-layer column of the first generated cell is all zeros") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const GenerationOrder order = s_curve_order(4, 5, static_cast<int>(rng() % 8));
        const MaskMatrix mask = build_mask_matrix(order, 2, 3, 3, 1, true);
        const Coord first = order.at(0);
        const int col = 5 * first.row + first.col;
        for (int row = 0; row < mask.rows(); ++row) CHECK(mask.bit(row, col) == 0);
    }
}

TEST_CASE("deeper-layer masks carry an all-ones center row") {
    const GenerationOrder order = hilbert_order(4, 4);
    const MaskMatrix mask = build_mask_matrix(order, 3, 3, 3, 1, false);
    const int center = 9 / 2;
    for (int block = 0; block < 3; ++block) {
        for (int col = 0; col < mask.cols(); ++col) {
            CHECK(mask.bit(block * 9 + center, col) == 1);
        }
    }
}

TEST_CASE("channel blocks repeat identically") {
    const GenerationOrder order = s_curve_order(5, 4, 2);
    const MaskMatrix mask = build_mask_matrix(order, 4, 3, 3, 2, false);
    const int block_rows = 9;
    for (int b = 1; b < 4; ++b) {
        for (int row = 0; row < block_rows; ++row) {
            for (int col = 0; col < mask.cols(); ++col) {
                CHECK(mask.bit(row, col) == mask.bit(b * block_rows + row, col));
            }
        }
    }
}

TEST_CASE("every set bit references a strictly earlier cell (first layer)") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 8; ++trial) {
        // Random orders via random priority shuffle.
        std::vector<Coord> seq;
        for (int r = 0; r < 5; ++r)
            for (int c = 0; c < 5; ++c) seq.push_back({r, c});
        std::shuffle(seq.begin(), seq.end(), rng);
        const GenerationOrder order(5, 5, seq);
        const int dil = 1 + static_cast<int>(rng() % 2);
        const MaskMatrix mask = build_mask_matrix(order, 1, 3, 3, dil, true);
        for (int i = 0; i < order.size(); ++i) {
            const Coord out = order.at(i);
            const int col = 5 * out.row + out.col;
            for (int dr = 0; dr < 3; ++dr) {
                for (int dc = 0; dc < 3; ++dc) {
                    if (!mask.bit(3 * dr + dc, col)) continue;
                    const int rr = out.row + dil * (dr - 1);
                    const int cc = out.col + dil * (dc - 1);
                    REQUIRE(rr >= 0);
                    REQUIRE(rr < 5);
                    REQUIRE(cc >= 0);
                    REQUIRE(cc < 5);
                    CHECK(order.index_of({rr, cc}) < i);
                }
            }
        }
    }
}

TEST_CASE("bits referencing pad cells are zero") {
    const MaskMatrix mask = build_mask_matrix(raster_order(4, 4), 1, 3, 3, 1, false);
    // Output (0,0): offsets with dr=0 or dc=0 reach pad.
    for (int dr = 0; dr < 3; ++dr) {
        for (int dc = 0; dc < 3; ++dc) {
            if (dr == 0 || dc == 0) CHECK(mask.bit(3 * dr + dc, 0) == 0);
        }
    }
    // Dilation 2 from (1,1): offset (0,0) references (-1,-1).
    const MaskMatrix dilated = build_mask_matrix(raster_order(4, 4), 1, 3, 3, 2, false);
    CHECK(dilated.bit(0, 4 * 1 + 1) == 0);
}

TEST_CASE("mask construction is deterministic") {
    const GenerationOrder order = hilbert_order(6, 6);
    const MaskMatrix a = build_mask_matrix(order, 2, 3, 3, 1, true);
    const MaskMatrix b = build_mask_matrix(order, 2, 3, 3, 1, true);
    CHECK(a.bits() == b.bits());
}

TEST_CASE("kernel validation") {
    const GenerationOrder order = raster_order(3, 3);
    CHECK_THROWS_AS(build_mask_matrix(order, 1, 2, 3, 1, true), std::invalid_argument);
    CHECK_THROWS_AS(build_mask_matrix(order, 1, 3, 3, 0, true), std::invalid_argument);
    CHECK_THROWS_AS(build_mask_matrix(order, 0, 3, 3, 1, true), std::invalid_argument);
}

TEST_CASE("mask cache returns stable entries and keys on layer kind") {
    MaskCache cache;
    const GenerationOrder order = s_curve_order(4, 4, 0);
    const MaskMatrix& a = cache.get(order, 2, 3, 3, 1, true);
    const MaskMatrix& b = cache.get(order, 2, 3, 3, 1, true);
    CHECK(&a == &b);
    const MaskMatrix& c = cache.get(order, 2, 3, 3, 1, false);
    CHECK(&a != &c);
    CHECK(cache.entries() == 2);
}

TEST_CASE("receptive field closure") {
    SUBCASE("depth 1 on raster equals the first-layer footprint") {
        const GenerationOrder order = raster_order(4, 4);
        const Reachability reach = receptive_field_closure(order, 3, 3, {1});
        const MaskMatrix mask = build_mask_matrix(order, 1, 3, 3, 1, true);
        for (int i = 0; i < 16; ++i) {
            const Coord out = order.at(i);
            for (int j = 0; j < 16; ++j) {
                const Coord in = order.at(j);
                const int dr = in.row - out.row + 1;
                const int dc = in.col - out.col + 1;
                bool expect = false;
                if (dr >= 0 && dr < 3 && dc >= 0 && dc < 3) {
                    expect = mask.bit(3 * dr + dc, 4 * out.row + out.col) != 0;
                }
                CHECK(reach.at(i, j) == expect);
            }
        }
    }
    SUBCASE("causality: no entry at or above the diagonal") {
        for (const GenerationOrder& order :
             {s_curve_order(5, 5, 3), hilbert_order(5, 5), raster_order(5, 5)}) {
            const Reachability reach = receptive_field_closure(order, 3, 3, {1, 2, 1, 1});
            for (int i = 0; i < order.size(); ++i) {
                for (int j = i; j < order.size(); ++j) CHECK_FALSE(reach.at(i, j));
            }
        }
    }
    SUBCASE("hamiltonian orders reach every predecessor at depth >= cell count") {
        for (const GenerationOrder& order : {s_curve_order(4, 4, 5), hilbert_order(4, 4)}) {
            const std::vector<int> schedule(16, 1);
            const Reachability reach = receptive_field_closure(order, 3, 3, schedule);
            for (int i = 0; i < 16; ++i) {
                for (int j = 0; j < i; ++j) CHECK(reach.at(i, j));
            }
        }
    }
    SUBCASE("closure is monotone in depth") {
        const GenerationOrder order = s_curve_order(4, 5, 1);
        std::vector<int> schedule;
        Reachability prev = receptive_field_closure(order, 3, 3, {1});
        schedule.push_back(1);
        for (int depth = 2; depth <= 6; ++depth) {
            schedule.push_back(depth % 2 == 0 ? 2 : 1);
            const Reachability next = receptive_field_closure(order, 3, 3, schedule);
            for (int i = 0; i < order.size(); ++i) {
                for (int j = 0; j < order.size(); ++j) {
                    if (prev.at(i, j)) CHECK(next.at(i, j));
                }
            }
            prev = next;
        }
    }
}

TEST_CASE("mask dump round-trips through the LMCM format") {
    const GenerationOrder order = s_curve_order(5, 3, 6);
    const MaskMatrix mask = build_mask_matrix(order, 2, 3, 3, 2, true);
    const std::string path =
        (std::filesystem::temp_directory_path() / "lmconv_mask_test.lmcm").string();
    save_mask(mask, path);
    const MaskMatrix back = load_mask(path);
    CHECK(back.bits() == mask.bits());
    CHECK(back.meta().k1 == mask.meta().k1);
    CHECK(back.meta().dilation == mask.meta().dilation);
    CHECK(back.meta().c_in == mask.meta().c_in);
    CHECK(back.meta().first_layer == mask.meta().first_layer);
    std::filesystem::remove(path);
}
