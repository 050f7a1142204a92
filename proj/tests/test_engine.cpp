#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "lmconv/engine.hpp"
#include "lmconv/io.hpp"
#include "oracles.hpp"

using namespace lmconv;

namespace {

ModelConfig tiny_binary(int h, int w, int depth = 2, int hidden = 5) {
    ModelConfig c;
    c.channels = 1;
    c.height = h;
    c.width = w;
    c.hidden = hidden;
    c.depth = depth;
    c.kernel = 3;
    c.dilations = std::vector<int>(static_cast<size_t>(depth), 1);
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

Tensor4 random_binary_batch(int n, int h, int w, std::mt19937_64& rng) {
    Tensor4 out(n, 1, h, w);
    for (size_t i = 0; i < out.size(); ++i) out.data()[i] = rng() % 2;
    return out;
}

TrainConfig single_order_train(const GenerationOrder& order) {
    TrainConfig t;
    t.orders = {order};
    t.batch_size = 4;
    t.lr = 5e-3;
    t.lr_decay = 1.0;
    t.clip_norm = 100.0;
    return t;
}

bool params_equal(const Parameters& a, const Parameters& b) {
    if (a.tensors.size() != b.tensors.size()) return false;
    for (size_t i = 0; i < a.tensors.size(); ++i) {
        if (a.tensors[i].values != b.tensors[i].values) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("train_step is bit-deterministic given seed, order and batch") {
    const ModelConfig config = tiny_binary(3, 3);
    MaskCache cache;
    const TrainConfig train = single_order_train(s_curve_order(3, 3, 0));
    std::mt19937_64 data_rng(1);
    const Tensor4 batch = random_binary_batch(4, 3, 3, data_rng);

    auto run = [&]() {
        Parameters params = init_parameters(config, 2);
        OptimizerState opt = OptimizerState::like(params);
        std::mt19937_64 rng(3);
        train_step(config, params, opt, cache, train, batch, rng);
        train_step(config, params, opt, cache, train, batch, rng);
        return params;
    };
    CHECK(params_equal(run(), run()));
}

TEST_CASE("200 steps on a fixed tiny batch decrease the smoothed loss") {
    const ModelConfig config = tiny_binary(3, 3, 3, 8);
    MaskCache cache;
    const TrainConfig train = single_order_train(s_curve_order(3, 3, 0));
    std::mt19937_64 data_rng(4);
    const Tensor4 batch = random_binary_batch(4, 3, 3, data_rng);

    Parameters params = init_parameters(config, 5);
    OptimizerState opt = OptimizerState::like(params);
    std::mt19937_64 rng(6);
    std::vector<double> losses;
    for (int step = 0; step < 200; ++step) {
        losses.push_back(train_step(config, params, opt, cache, train, batch, rng).loss);
    }
    auto window_mean = [&](size_t begin, size_t end) {
        double acc = 0.0;
        for (size_t i = begin; i < end; ++i) acc += losses[i];
        return acc / static_cast<double>(end - begin);
    };
    const double early = window_mean(0, 20);
    const double late = window_mean(180, 200);
    CHECK(late < early);
    CHECK(late < 0.9 * early);  // overfitting one batch should bite hard
}

TEST_CASE("order draws are uniform over the training set") {
    const ModelConfig config = tiny_binary(2, 2, 1, 3);
    MaskCache cache;
    TrainConfig train;
    for (int v = 0; v < 4; ++v) train.orders.push_back(s_curve_order(2, 2, v));
    train.lr = 1e-5;
    std::mt19937_64 data_rng(7);
    const Tensor4 batch = random_binary_batch(1, 2, 2, data_rng);

    Parameters params = init_parameters(config, 8);
    OptimizerState opt = OptimizerState::like(params);
    std::mt19937_64 rng(9);
    std::vector<int> counts(4, 0);
    const int steps = 800;
    for (int step = 0; step < steps; ++step) {
        counts[static_cast<size_t>(
            train_step(config, params, opt, cache, train, batch, rng).order_index)]++;
    }
    // ~200 each; 5 sigma of Binomial(800, 1/4) is about 61.
    for (int v = 0; v < 4; ++v) {
        CAPTURE(v);
        CHECK(counts[static_cast<size_t>(v)] > 200 - 61);
        CHECK(counts[static_cast<size_t>(v)] < 200 + 61);
    }
    // One-order degenerate case always picks that order.
    const TrainConfig one = single_order_train(raster_order(2, 2));
    CHECK(train_step(config, params, opt, cache, one, batch, rng).order_index == 0);
}

TEST_CASE("forced logits sample a constant image") {
    ModelConfig config = tiny_binary(3, 3, 1, 3);
    Parameters params = init_parameters(config, 10);
    for (double& v : params.at("head.weight").values) v = 0.0;
    params.at("head.bias").values = {-40.0, 40.0};  // logit 1 wins everywhere
    MaskCache cache;
    std::mt19937_64 rng(11);
    const Tensor4 img = sample(config, params, cache, hilbert_order(3, 3), rng);
    for (size_t i = 0; i < img.size(); ++i) CHECK(img.data()[i] == 1.0);
}

TEST_CASE("log prob accumulated while sampling equals the joint nll") {
    const ModelConfig config = tiny_binary(3, 3, 2, 6);
    const Parameters params = init_parameters(config, 12);
    MaskCache cache;
    for (const GenerationOrder& order : {s_curve_order(3, 3, 0), hilbert_order(3, 3)}) {
        std::mt19937_64 rng(13);
        double log_prob = 0.0;
        const Tensor4 img = sample(config, params, cache, order, rng, 1.0, &log_prob);
        const double nll = joint_nll(config, params, cache, order, img)[0];
        CHECK(std::abs(log_prob + nll) < 1e-9);
    }
}

TEST_CASE("two hilbert directions both yield valid samples with shared params") {
    const ModelConfig config = tiny_binary(4, 4, 2, 6);
    const Parameters params = init_parameters(config, 14);
    MaskCache cache;
    std::mt19937_64 rng(15);
    for (const GenerationOrder& order :
         {hilbert_order(4, 4), reverse(hilbert_order(4, 4))}) {
        const Tensor4 img = sample(config, params, cache, order, rng);
        for (size_t i = 0; i < img.size(); ++i) {
            CHECK((img.data()[i] == 0.0 || img.data()[i] == 1.0));
        }
    }
}

TEST_CASE("sampled 2x2 distribution matches enumeration (chi-squared)") {
    const ModelConfig config = tiny_binary(2, 2, 2, 5);
    const Parameters params = init_parameters(config, 16);
    MaskCache cache;
    const GenerationOrder order = s_curve_order(2, 2, 0);

    std::vector<double> probs(16, 0.0);
    for (int code = 0; code < 16; ++code) {
        probs[static_cast<size_t>(code)] =
            std::exp(-joint_nll(config, params, cache, order, image_from_code(code, 2, 2))[0]);
    }

    std::mt19937_64 rng(17);
    const int n = 20000;  // the full 1e5-sample test runs in the acceptance suite
    std::vector<int> counts(16, 0);
    for (int s = 0; s < n; ++s) {
        const Tensor4 img = sample(config, params, cache, order, rng);
        int code = 0;
        for (int bit = 0; bit < 4; ++bit) {
            if (img(0, 0, bit / 2, bit % 2) != 0.0) code |= 1 << bit;
        }
        counts[static_cast<size_t>(code)]++;
    }
    double chi2 = 0.0;
    for (int code = 0; code < 16; ++code) {
        const double expect = probs[static_cast<size_t>(code)] * n;
        REQUIRE(expect > 5.0);
        const double diff = counts[static_cast<size_t>(code)] - expect;
        chi2 += diff * diff / expect;
    }
    CHECK(chi2 < 30.5779);  // chi2 15 dof at p=0.01
}

TEST_CASE("complete") {
    const ModelConfig config = tiny_binary(4, 4, 2, 5);
    const Parameters params = init_parameters(config, 18);
    MaskCache cache;
    std::mt19937_64 data_rng(19);
    const Tensor4 image = random_binary_batch(1, 4, 4, data_rng);

    SUBCASE("fully observed image returns unchanged") {
        ObservedSet obs(4, 4);
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) obs.set(r, c);
        std::mt19937_64 rng(20);
        const Tensor4 out = complete(config, params, cache, image, obs,
                                     max_context_order(obs, 0), rng);
        CHECK(oracle::max_abs_diff(out, image) == 0.0);
    }
    SUBCASE("empty observed set reproduces unconditional sampling") {
        const ObservedSet obs(4, 4);
        const GenerationOrder order = max_context_order(obs, 2);
        std::mt19937_64 rng_a(21), rng_b(21);
        const Tensor4 a = complete(config, params, cache, image, obs, order, rng_a);
        const Tensor4 b = sample(config, params, cache, order, rng_b);
        CHECK(oracle::max_abs_diff(a, b) == 0.0);
    }
    SUBCASE("mismatched prefix is rejected") {
        ObservedSet obs(4, 4);
        obs.set(3, 3);
        std::mt19937_64 rng(22);
        CHECK_THROWS_AS(
            complete(config, params, cache, image, obs, s_curve_order(4, 4, 0), rng),
            std::invalid_argument);
    }
    SUBCASE("hidden ground truth never leaks into the completion") {
        ObservedSet obs(4, 4);
        for (int r = 2; r < 4; ++r)
            for (int c = 0; c < 4; ++c) obs.set(r, c);
        const GenerationOrder order = max_context_order(obs, 0);
        Tensor4 flipped = image;
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 4; ++c) flipped(0, 0, r, c) = 1.0 - flipped(0, 0, r, c);
        std::mt19937_64 rng_a(23), rng_b(23);
        const Tensor4 a = complete(config, params, cache, image, obs, order, rng_a);
        const Tensor4 b = complete(config, params, cache, flipped, obs, order, rng_b);
        CHECK(oracle::max_abs_diff(a, b) == 0.0);
    }
}

TEST_CASE("conditional nll") {
    const ModelConfig config = tiny_binary(2, 2, 2, 5);
    const Parameters params = init_parameters(config, 24);
    MaskCache cache;
    const Tensor4 image = image_from_code(0b1001, 2, 2);

    SUBCASE("empty observed set equals the joint nll") {
        const ObservedSet obs(2, 2);
        const GenerationOrder order = s_curve_order(2, 2, 1);
        CHECK(conditional_nll(config, params, cache, image, obs, order) ==
              doctest::Approx(joint_nll(config, params, cache, order, image)[0])
                  .epsilon(1e-12));
    }
    SUBCASE("single hidden pixel matches the brute-force posterior") {
        // Hide (0,0); the max-context order places it last, so the model
        // conditional must equal p(x00 | rest) = p(x) / sum_v p(x00=v, rest).
        ObservedSet obs(2, 2);
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) obs.set(r, c, !(r == 0 && c == 0));
        const GenerationOrder order = max_context_order(obs, 0);

        const double direct = conditional_nll(config, params, cache, image, obs, order);

        // The joint being conditioned is the one this order's decomposition
        // defines, so the enumeration must use the same order.
        auto joint_of = [&](double v) {
            Tensor4 probe = image;
            probe(0, 0, 0, 0) = v;
            return std::exp(-joint_nll(config, params, cache, order, probe)[0]);
        };
        const double numer = joint_of(image(0, 0, 0, 0));
        const double denom = joint_of(0.0) + joint_of(1.0);
        CHECK(std::abs(direct - (-std::log(numer / denom))) < 1e-9);
    }
}

TEST_CASE("conditional nll ensembled over two max-context orders obeys Jensen") {
    const ModelConfig config = tiny_binary(4, 4, 2, 6);
    const Parameters params = init_parameters(config, 31);
    MaskCache cache;
    std::mt19937_64 rng(32);

    ObservedSet obs(4, 4);
    for (int r = 2; r < 4; ++r)
        for (int c = 0; c < 4; ++c) obs.set(r, c);
    // Two distinct orders sharing the observed prefix as a set.
    const GenerationOrder a = max_context_order(obs, 4);
    const GenerationOrder b = max_context_order(obs, 6);
    REQUIRE_FALSE(a == b);

    for (int trial = 0; trial < 5; ++trial) {
        const Tensor4 img = random_binary_batch(1, 4, 4, rng);
        const double na = conditional_nll(config, params, cache, img, obs, a);
        const double nb = conditional_nll(config, params, cache, img, obs, b);
        // -log((exp(-na) + exp(-nb)) / 2), stabilized.
        const double m = std::min(na, nb);
        const double ens =
            m + std::log(2.0) - std::log(std::exp(m - na) + std::exp(m - nb));
        CHECK(ens <= (na + nb) / 2.0 + 1e-9);
        CHECK(ens >= m - 1e-9);
    }
}

TEST_CASE("brief training beats the independent-pixel baseline") {
    // Baseline: per-pixel empirical marginals from the train split.
    DatasetSpec spec;
    spec.source = "synthetic:stripes";
    spec.height = 3;
    spec.width = 3;
    spec.count = 700;
    spec.bits = 1;
    spec.train_fraction = 0.85;
    spec.seed = 33;
    const Dataset data = load_dataset(spec);

    std::vector<double> marginal(9, 0.0);
    for (int b = 0; b < data.train.batch(); ++b) {
        for (int j = 0; j < 9; ++j) {
            marginal[static_cast<size_t>(j)] += data.train(b, 0, j / 3, j % 3);
        }
    }
    for (double& m : marginal) {
        m = std::clamp(m / data.train.batch(), 1e-6, 1.0 - 1e-6);
    }
    double baseline = 0.0;
    for (int b = 0; b < data.test.batch(); ++b) {
        for (int j = 0; j < 9; ++j) {
            const double v = data.test(b, 0, j / 3, j % 3);
            const double p = marginal[static_cast<size_t>(j)];
            baseline -= v > 0.5 ? std::log(p) : std::log(1.0 - p);
        }
    }
    baseline /= data.test.batch();

    const ModelConfig config = tiny_binary(3, 3, 3, 12);
    MaskCache cache;
    Parameters params = init_parameters(config, 34);
    OptimizerState opt = OptimizerState::like(params);
    TrainConfig train;
    for (int v = 0; v < 8; ++v) train.orders.push_back(s_curve_order(3, 3, v));
    train.batch_size = 16;
    train.lr = 2e-3;
    std::mt19937_64 rng(35);
    const size_t image_sz = 9;
    for (int step = 0; step < 350; ++step) {
        Tensor4 batch(train.batch_size, 1, 3, 3);
        for (int i = 0; i < train.batch_size; ++i) {
            const int src = static_cast<int>(rng() % static_cast<uint64_t>(data.train.batch()));
            std::copy(data.train.data() + src * image_sz,
                      data.train.data() + (src + 1) * image_sz,
                      batch.data() + static_cast<size_t>(i) * image_sz);
        }
        train_step(config, params, opt, cache, train, batch, rng);
    }

    double model_nll = 0.0;
    const std::vector<double> nll =
        joint_nll(config, params, cache, s_curve_order(3, 3, 0), data.test);
    for (double v : nll) model_nll += v;
    model_nll /= static_cast<double>(nll.size());
    CAPTURE(baseline);
    CAPTURE(model_nll);
    CHECK(model_nll < baseline);
}

TEST_CASE("average_parameters") {
    const ModelConfig config = tiny_binary(2, 2, 1, 3);
    const Parameters a = init_parameters(config, 25);
    const Parameters b = init_parameters(config, 26);

    SUBCASE("single checkpoint is the identity") {
        CHECK(params_equal(average_parameters({a}), a));
    }
    SUBCASE("averaging copies of the same parameters changes nothing") {
        const Parameters avg = average_parameters({a, a, a});
        for (size_t t = 0; t < a.tensors.size(); ++t) {
            for (size_t i = 0; i < a.tensors[t].values.size(); ++i) {
                CHECK(avg.tensors[t].values[i] ==
                      doctest::Approx(a.tensors[t].values[i]).epsilon(1e-15));
            }
        }
    }
    SUBCASE("two-tensor mean is elementwise") {
        const Parameters avg = average_parameters({a, b});
        for (size_t t = 0; t < a.tensors.size(); ++t) {
            for (size_t i = 0; i < a.tensors[t].values.size(); ++i) {
                CHECK(avg.tensors[t].values[i] ==
                      doctest::Approx((a.tensors[t].values[i] + b.tensors[t].values[i]) / 2.0));
            }
        }
    }
    SUBCASE("shape mismatch is rejected") {
        const Parameters c = init_parameters(tiny_binary(2, 2, 2, 3), 27);
        CHECK_THROWS_AS(average_parameters({a, c}), std::invalid_argument);
    }
}

TEST_CASE("color mixture training steps run and reduce the loss") {
    ModelConfig config;
    config.channels = 3;
    config.height = 3;
    config.width = 3;
    config.hidden = 8;
    config.depth = 2;
    config.kernel = 3;
    config.dilations = {1, 1};
    config.head = HeadKind::LogisticMixture;
    config.n_mix = 2;
    config.bits = 3;
    Parameters params = init_parameters(config, 36);
    OptimizerState opt = OptimizerState::like(params);
    MaskCache cache;
    TrainConfig train;
    train.orders = {s_curve_order(3, 3, 0), hilbert_order(3, 3)};
    train.batch_size = 4;
    train.lr = 2e-3;

    std::mt19937_64 rng(37);
    Tensor4 batch(4, 3, 3, 3);
    for (size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng() % 8;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 60; ++step) {
        const double loss = train_step(config, params, opt, cache, train, batch, rng).loss;
        if (step == 0) first = loss;
        last = loss;
        REQUIRE(std::isfinite(loss));
    }
    CHECK(last < first);
}

TEST_CASE("non-finite loss aborts the step and reports") {
    ModelConfig config = tiny_binary(2, 2, 1, 3);
    Parameters params = init_parameters(config, 28);
    // Large enough that the stem conv accumulation overflows to infinity.
    for (double& v : params.at("conv0.weight").values) v = 1e308;
    OptimizerState opt = OptimizerState::like(params);
    MaskCache cache;
    const TrainConfig train = single_order_train(raster_order(2, 2));
    std::mt19937_64 rng(29);
    std::mt19937_64 data_rng(30);
    const Tensor4 batch = random_binary_batch(2, 2, 2, data_rng);
    CHECK_THROWS_AS(train_step(config, params, opt, cache, train, batch, rng), NumericError);
}
