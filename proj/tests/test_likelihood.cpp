#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "lmconv/likelihood.hpp"
#include "oracles.hpp"

using namespace lmconv;

namespace {

ModelConfig tiny_binary_2x2(uint64_t /*seed*/ = 0) {
    ModelConfig c;
    c.channels = 1;
    c.height = 2;
    c.width = 2;
    c.hidden = 5;
    c.depth = 2;
    c.kernel = 3;
    c.dilations = {1, 1};
    c.head = HeadKind::Binary;
    c.bits = 1;
    return c;
}

Tensor4 image_from_code(int code, int h, int w) {
    Tensor4 img(1, 1, h, w);
    for (int bit = 0; bit < h * w; ++bit) {
        img(0, 0, bit / w, bit % w) = (code >> bit) & 1;
    }
    return img;
}

}  // namespace

TEST_CASE("discretized logistic mixture normalizes over 256 bins") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 5);
        std::vector<double> w(n), mu(n), ls(n);
        oracle::fill_uniform(w, rng, -2.0, 2.0);
        oracle::fill_uniform(mu, rng, -1.2, 1.2);
        oracle::fill_uniform(ls, rng, -8.0, 1.0);  // includes the clamp region
        double total = 0.0;
        for (int v = 0; v < 256; ++v) {
            total += std::exp(dlm_log_prob(w.data(), mu.data(), ls.data(), n, v, 8));
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("degenerate mixture concentrates on its bin") {
    // Single component, mean on the bin center. Shrinking the scale piles
    // probability onto that bin until the -7 clamp freezes it at
    // sigma(4.3..) - sigma(-4.3..) ~ 0.973 for 8-bit data.
    const int v = 100;
    const double mu = rescale_value(v, 8);
    const double w = 0.0;
    double prev = 0.0;
    for (double ls : {2.0, 0.0, -2.0, -4.0, -6.0, -7.0}) {
        const double p = std::exp(dlm_log_prob(&w, &mu, &ls, 1, v, 8));
        CHECK(p > prev);
        prev = p;
    }
    CHECK(prev > 0.97);
    // Below the clamp nothing changes.
    const double ls_floor = -7.0, ls_below = -12.0;
    CHECK(dlm_log_prob(&w, &mu, &ls_floor, 1, v, 8) ==
          dlm_log_prob(&w, &mu, &ls_below, 1, v, 8));
    // The leaked mass sits in the adjacent bins.
    double total = prev;
    total += std::exp(dlm_log_prob(&w, &mu, &ls_floor, 1, v - 1, 8));
    total += std::exp(dlm_log_prob(&w, &mu, &ls_floor, 1, v + 1, 8));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
    // At coarser bit depths the clamp allows an essentially point mass.
    const int v3 = 3;
    const double mu3 = rescale_value(v3, 3);
    CHECK(std::exp(dlm_log_prob(&w, &mu3, &ls_floor, 1, v3, 3)) > 1.0 - 1e-9);
}

TEST_CASE("dlm rejects out-of-range intensities") {
    const double w = 0.0, mu = 0.0, ls = 0.0;
    CHECK_THROWS_AS(dlm_log_prob(&w, &mu, &ls, 1, 256, 8), std::invalid_argument);
    CHECK_THROWS_AS(dlm_log_prob(&w, &mu, &ls, 1, -1, 8), std::invalid_argument);
}

TEST_CASE("binary head") {
    CHECK(binary_log_prob(0.0, 0.0, 0) == doctest::Approx(std::log(0.5)));
    CHECK(binary_log_prob(0.0, 0.0, 1) == doctest::Approx(std::log(0.5)));
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_real_distribution<double> dist(-5.0, 5.0);
        const double z0 = dist(rng), z1 = dist(rng);
        const double p0 = std::exp(binary_log_prob(z0, z1, 0));
        const double p1 = std::exp(binary_log_prob(z0, z1, 1));
        CHECK(p0 + p1 == doctest::Approx(1.0).epsilon(1e-12));
        // brute-force softmax
        const double e0 = std::exp(z0), e1 = std::exp(z1);
        CHECK(p0 == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-12));
    }
}

TEST_CASE("uniform 256-level head reports exactly 8 bits per dimension") {
    ModelConfig c;
    c.channels = 3;
    c.height = 7;
    c.width = 5;
    c.hidden = 4;
    c.depth = 1;
    c.dilations = {1};
    c.head = HeadKind::LogisticMixture;
    c.bits = 8;
    const double nats = uniform_head_nll(c);
    const double bpd = bits_per_dim(nats, c);
    CHECK(bpd == 8.0);  // exact, not approximate
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.2f", bpd);
    CHECK(std::string(buf) == "8.00");
}

TEST_CASE("pixel-level dlm gradients match finite differences") {
    std::mt19937_64 rng(4);
    for (const int channels : {1, 3}) {
        ModelConfig c;
        c.channels = channels;
        c.height = 1;
        c.width = 1;
        c.hidden = 4;
        c.depth = 1;
        c.dilations = {1};
        c.head = HeadKind::LogisticMixture;
        c.n_mix = 3;
        c.bits = 4;

        Tensor4 head(1, c.head_channels(), 1, 1);
        oracle::fill_uniform(head, rng, -1.5, 1.5);
        Tensor4 raw(1, channels, 1, 1);
        for (int k = 0; k < channels; ++k) raw(0, k, 0, 0) = static_cast<double>(rng() % 16);

        Tensor4 grad(1, c.head_channels(), 1, 1);
        pixel_nll(c, head, raw, 0, 0, 0, &grad, 1.0);

        const double h = 1e-6;
        for (int p = 0; p < c.head_channels(); ++p) {
            const double saved = head(0, p, 0, 0);
            head(0, p, 0, 0) = saved + h;
            const double up = pixel_nll(c, head, raw, 0, 0, 0);
            head(0, p, 0, 0) = saved - h;
            const double down = pixel_nll(c, head, raw, 0, 0, 0);
            head(0, p, 0, 0) = saved;
            const double fd = (up - down) / (2 * h);
            const double an = grad(0, p, 0, 0);
            CAPTURE(channels);
            CAPTURE(p);
            CHECK(std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0}) < 1e-4);
        }
    }
}

TEST_CASE("color mixture with coupling normalizes over the joint support") {
    // 2-bit color: sum over all 64 (r,g,b) combinations must be 1.
    std::mt19937_64 rng(5);
    ModelConfig c;
    c.channels = 3;
    c.height = 1;
    c.width = 1;
    c.hidden = 4;
    c.depth = 1;
    c.dilations = {1};
    c.head = HeadKind::LogisticMixture;
    c.n_mix = 2;
    c.bits = 2;
    Tensor4 head(1, c.head_channels(), 1, 1);
    oracle::fill_uniform(head, rng, -1.0, 1.0);
    double total = 0.0;
    Tensor4 raw(1, 3, 1, 1);
    for (int r = 0; r < 4; ++r) {
        for (int g = 0; g < 4; ++g) {
            for (int b = 0; b < 4; ++b) {
                raw(0, 0, 0, 0) = r;
                raw(0, 1, 0, 0) = g;
                raw(0, 2, 0, 0) = b;
                total += std::exp(-pixel_nll(c, head, raw, 0, 0, 0));
            }
        }
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
}

TEST_CASE("2x2 4-level mixture joint distribution sums to one") {
    // Exhaustive 4^4 enumeration under the logistic-mixture head; certifies
    // the head normalization and the mask causality together.
    ModelConfig config;
    config.channels = 1;
    config.height = 2;
    config.width = 2;
    config.hidden = 5;
    config.depth = 2;
    config.kernel = 3;
    config.dilations = {1, 1};
    config.head = HeadKind::LogisticMixture;
    config.n_mix = 2;
    config.bits = 2;
    const Parameters params = init_parameters(config, 15);
    MaskCache cache;
    for (const GenerationOrder& order : {s_curve_order(2, 2, 5), hilbert_order(2, 2)}) {
        double total = 0.0;
        for (int code = 0; code < 256; ++code) {
            Tensor4 img(1, 1, 2, 2);
            img(0, 0, 0, 0) = code & 3;
            img(0, 0, 0, 1) = (code >> 2) & 3;
            img(0, 0, 1, 0) = (code >> 4) & 3;
            img(0, 0, 1, 1) = (code >> 6) & 3;
            total += std::exp(-joint_nll(config, params, cache, order, img)[0]);
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("2x2 binary joint distribution sums to one across order families") {
    const ModelConfig config = tiny_binary_2x2();
    const Parameters params = init_parameters(config, 6);
    MaskCache cache;
    for (const GenerationOrder& order :
         {raster_order(2, 2), s_curve_order(2, 2, 4), hilbert_order(2, 2)}) {
        double total = 0.0;
        for (int code = 0; code < 16; ++code) {
            const Tensor4 img = image_from_code(code, 2, 2);
            total += std::exp(-joint_nll(config, params, cache, order, img)[0]);
        }
        CHECK(std::abs(total - 1.0) < 1e-6);
    }
}

TEST_CASE("joint nll equals the sequentially evaluated conditionals") {
    const ModelConfig config = tiny_binary_2x2();
    const Parameters params = init_parameters(config, 7);
    MaskCache cache;
    const GenerationOrder order = s_curve_order(2, 2, 3);
    const LayerMasks masks = masks_for_order(cache, order, config);
    const Tensor4 img = image_from_code(0b0110, 2, 2);

    const double parallel = joint_nll(config, params, cache, order, img)[0];

    // Oracle: evaluate each conditional with the suffix zeroed out, so any
    // causality leak would surface as a mismatch.
    double sequential = 0.0;
    for (int i = 0; i < order.size(); ++i) {
        Tensor4 prefix(1, 1, 2, 2);
        Tensor4 input(1, 1, 2, 2);
        for (int j = 0; j < i; ++j) {
            const Coord cell = order.at(j);
            prefix(0, 0, cell.row, cell.col) = img(0, 0, cell.row, cell.col);
            input(0, 0, cell.row, cell.col) =
                rescale_value(img(0, 0, cell.row, cell.col), config.bits);
        }
        const Tensor4 out = net_forward(config, params, input, masks);
        const Coord cell = order.at(i);
        Tensor4 target = img;
        sequential += pixel_nll(config, out, target, 0, cell.row, cell.col);
    }
    CHECK(std::abs(parallel - sequential) < 1e-9);
}

TEST_CASE("deterministic uniform binary model scores D log 2") {
    ModelConfig config = tiny_binary_2x2();
    Parameters params = init_parameters(config, 8);
    // Zero head weights and bias: logits (0,0) everywhere, so every
    // conditional is uniform regardless of context.
    for (double& v : params.at("head.weight").values) v = 0.0;
    for (double& v : params.at("head.bias").values) v = 0.0;
    MaskCache cache;
    const double nll =
        joint_nll(config, params, cache, raster_order(2, 2), image_from_code(5, 2, 2))[0];
    CHECK(nll == doctest::Approx(4.0 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("ensemble nll") {
    const ModelConfig config = tiny_binary_2x2();
    const Parameters params = init_parameters(config, 9);
    MaskCache cache;
    const Tensor4 img = image_from_code(0b1010, 2, 2);

    SUBCASE("K=1 reduces to the joint nll") {
        const std::vector<GenerationOrder> one{raster_order(2, 2)};
        CHECK(ensemble_nll(config, params, cache, one, img)[0] ==
              doctest::Approx(joint_nll(config, params, cache, one[0], img)[0]).epsilon(1e-12));
    }
    SUBCASE("Jensen bound against the member mean") {
        std::vector<GenerationOrder> orders;
        for (int v = 0; v < 8; ++v) orders.push_back(s_curve_order(2, 2, v));
        const double ens = ensemble_nll(config, params, cache, orders, img)[0];
        double mean = 0.0;
        double worst = -1e308;
        for (const GenerationOrder& o : orders) {
            const double nll = joint_nll(config, params, cache, o, img)[0];
            mean += nll;
            worst = std::max(worst, nll);
        }
        mean /= static_cast<double>(orders.size());
        CHECK(ens <= mean + 1e-9);
        CHECK(ens < worst);  // strict once any two members differ
    }
    SUBCASE("empty order list is rejected") {
        CHECK_THROWS_AS(ensemble_nll(config, params, cache, {}, img), std::invalid_argument);
    }
}
