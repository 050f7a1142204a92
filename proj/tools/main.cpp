// Command-line surface: train / eval / sample / complete / verify / bench.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include "lmconv/engine.hpp"
#include "lmconv/io.hpp"
#include "lmconv/verify.hpp"

using namespace lmconv;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumeric = 3;

struct TrainSetup {
    DatasetSpec data;
    ModelConfig model;
    TrainConfig train;
    uint64_t init_seed = 0;
    int ckpt_every = 1;  // epochs between checkpoint writes
    int eval_cap = 256;  // max images per per-order bpd log line
};

std::vector<std::string> split_names(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

TrainSetup read_train_config(const std::string& path) {
    const ConfigFile cfg = ConfigFile::parse_file(path);
    TrainSetup s;

    s.data.source = cfg.get("data.source");
    s.data.height = static_cast<int>(cfg.get_int_or("data.height", 0));
    s.data.width = static_cast<int>(cfg.get_int_or("data.width", 0));
    s.data.count = static_cast<int>(cfg.get_int_or("data.count", 0));
    s.data.bits = static_cast<int>(cfg.get_int_or("data.bits", 8));
    s.data.binarize = cfg.get_bool_or("data.binarize", false);
    s.data.train_fraction = cfg.get_double_or("data.train_fraction", 0.9);
    s.data.seed = static_cast<uint64_t>(cfg.get_int_or("data.seed", 0));

    s.model.height = s.data.height;
    s.model.width = s.data.width;
    s.model.bits = s.data.bits;
    s.model.channels = static_cast<int>(cfg.get_int_or("model.channels", 1));
    s.model.hidden = static_cast<int>(cfg.get_int_or("model.hidden", 64));
    s.model.depth = static_cast<int>(cfg.get_int_or("model.depth", 8));
    s.model.kernel = static_cast<int>(cfg.get_int_or("model.kernel", 3));
    if (cfg.has("model.dilations")) {
        s.model.dilations = cfg.get_int_list("model.dilations");
    } else {
        s.model.dilations = ModelConfig::default_dilations(s.model.depth);
    }
    const std::string head = cfg.get_or("model.head", "binary");
    if (head == "binary") {
        s.model.head = HeadKind::Binary;
    } else if (head == "dlm") {
        s.model.head = HeadKind::LogisticMixture;
    } else {
        throw FormatError("config: model.head must be 'binary' or 'dlm', got '" + head + "'");
    }
    s.model.n_mix = static_cast<int>(cfg.get_int_or("model.n_mix", 10));
    s.model.mask_conditioning = cfg.get_bool_or("model.mask_conditioning", false);
    s.model.norm_eps = cfg.get_double_or("model.norm_eps", 1e-5);

    s.train.batch_size = static_cast<int>(cfg.get_int_or("train.batch_size", 32));
    s.train.lr = cfg.get_double_or("train.lr", 2e-4);
    s.train.lr_decay = cfg.get_double_or("train.lr_decay", 1.0 - 5e-6);
    s.train.clip_norm = cfg.get_double_or("train.clip_norm", 2e6);
    s.train.epochs = static_cast<int>(cfg.get_int_or("train.epochs", 1));
    s.train.seed = static_cast<uint64_t>(cfg.get_int_or("train.seed", 1));
    s.train.avg_window = static_cast<int>(cfg.get_int_or("train.avg_window", 0));
    s.init_seed = static_cast<uint64_t>(cfg.get_int_or("train.init_seed",
                                                       static_cast<long>(s.train.seed)));
    s.ckpt_every = static_cast<int>(cfg.get_int_or("train.ckpt_every", 1));
    s.eval_cap = static_cast<int>(cfg.get_int_or("train.eval_cap", 256));

    const std::string orders = cfg.get_or("train.orders", "s0,s1,s2,s3,s4,s5,s6,s7");
    for (const std::string& name : split_names(orders)) {
        s.train.orders.push_back(order_by_name(name, s.model.height, s.model.width));
    }
    if (s.train.orders.empty()) throw FormatError("config: train.orders is empty");
    return s;
}

Tensor4 batch_slice(const Tensor4& set, const std::vector<int>& perm, int begin, int count) {
    Tensor4 out(count, set.channels(), set.height(), set.width());
    const size_t image_sz = set.size() / static_cast<size_t>(set.batch());
    for (int i = 0; i < count; ++i) {
        const int src = perm[static_cast<size_t>(begin + i)];
        std::copy(set.data() + src * image_sz, set.data() + (src + 1) * image_sz,
                  out.data() + static_cast<size_t>(i) * image_sz);
    }
    return out;
}

Tensor4 head_subset(const Tensor4& set, int count) {
    const int n = std::min(count, set.batch());
    Tensor4 out(n, set.channels(), set.height(), set.width());
    const size_t image_sz = set.size() / static_cast<size_t>(set.batch());
    std::copy(set.data(), set.data() + static_cast<size_t>(n) * image_sz, out.data());
    return out;
}

double mean_of(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

int cmd_train(const std::string& config_path, const std::string& out_path) {
    const TrainSetup setup = read_train_config(config_path);
    const Dataset data = load_dataset(setup.data);
    ModelConfig model = setup.model;
    model.validate();

    Parameters params = init_parameters(model, setup.init_seed);
    OptimizerState opt = OptimizerState::like(params);
    MaskCache cache;
    for (const GenerationOrder& order : setup.train.orders) {
        masks_for_order(cache, order, model);  // compile and cache up front
    }

    std::mt19937_64 rng(setup.train.seed);
    std::vector<double> loss_tail;
    std::vector<Parameters> avg_tail;
    const int n_train = data.train.batch();
    std::vector<int> perm(static_cast<size_t>(n_train));
    std::iota(perm.begin(), perm.end(), 0);

    std::printf("train: %d images (%d held out), %zu parameters, %zu orders\n", n_train,
                data.test.batch(), params.total_size(), setup.train.orders.size());
    for (int epoch = 1; epoch <= setup.train.epochs; ++epoch) {
        std::shuffle(perm.begin(), perm.end(), rng);
        double epoch_loss = 0.0;
        int batches = 0;
        for (int begin = 0; begin + setup.train.batch_size <= n_train;
             begin += setup.train.batch_size) {
            const Tensor4 batch = batch_slice(data.train, perm, begin, setup.train.batch_size);
            const StepResult step = train_step(model, params, opt, cache, setup.train, batch, rng);
            epoch_loss += step.loss;
            ++batches;
            loss_tail.push_back(step.loss);
            if (loss_tail.size() > 64) loss_tail.erase(loss_tail.begin());
        }
        std::printf("epoch %d: mean train nll %.4f nats\n", epoch,
                    batches > 0 ? epoch_loss / batches : 0.0);

        const Tensor4 train_eval = head_subset(data.train, setup.eval_cap);
        const Tensor4 test_eval = head_subset(data.test, setup.eval_cap);
        for (size_t oi = 0; oi < setup.train.orders.size(); ++oi) {
            const GenerationOrder& order = setup.train.orders[oi];
            const double tr = mean_of(joint_nll(model, params, cache, order, train_eval));
            std::printf("epoch %d order %zu: train %.4f nats (%.4f bpd)", epoch, oi, tr,
                        bits_per_dim(tr, model));
            if (test_eval.batch() > 0) {
                const double te = mean_of(joint_nll(model, params, cache, order, test_eval));
                std::printf(", test %.4f nats (%.4f bpd)", te, bits_per_dim(te, model));
            }
            std::printf("\n");
        }

        if (setup.train.avg_window > 0) {
            avg_tail.push_back(params);
            if (avg_tail.size() > static_cast<size_t>(setup.train.avg_window)) {
                avg_tail.erase(avg_tail.begin());
            }
        }
        if (epoch % std::max(1, setup.ckpt_every) == 0 || epoch == setup.train.epochs) {
            Checkpoint ckpt;
            ckpt.config = model;
            ckpt.orders = setup.train.orders;
            ckpt.params = avg_tail.empty() ? params : average_parameters(avg_tail);
            ckpt.optimizer = opt;
            ckpt.step = static_cast<uint64_t>(opt.step);
            ckpt.seed = setup.train.seed;
            ckpt.loss_tail = loss_tail;
            save_checkpoint(ckpt, out_path);
        }
    }
    std::printf("checkpoint written to %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& config_path,
             const std::string& orders_csv, bool ensemble, int cap) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const TrainSetup setup = read_train_config(config_path);
    const Dataset data = load_dataset(setup.data);
    const Tensor4 eval_set = head_subset(data.test.batch() > 0 ? data.test : data.train, cap);

    std::vector<GenerationOrder> orders;
    for (const std::string& name : split_names(orders_csv)) {
        orders.push_back(order_by_name(name, ckpt.config.height, ckpt.config.width));
    }
    if (orders.empty()) throw std::invalid_argument("eval: no orders given");

    MaskCache cache;
    const bool binary = ckpt.config.head == HeadKind::Binary;
    for (size_t oi = 0; oi < orders.size(); ++oi) {
        const double nats = mean_of(joint_nll(ckpt.config, ckpt.params, cache, orders[oi], eval_set));
        if (binary) {
            std::printf("order %zu: %.4f nats\n", oi, nats);
        } else {
            std::printf("order %zu: %.4f bpd (%.4f nats)\n", oi,
                        bits_per_dim(nats, ckpt.config), nats);
        }
    }
    if (ensemble) {
        const double nats =
            mean_of(ensemble_nll(ckpt.config, ckpt.params, cache, orders, eval_set));
        if (binary) {
            std::printf("ensemble (%zu orders): %.4f nats\n", orders.size(), nats);
        } else {
            std::printf("ensemble (%zu orders): %.4f bpd (%.4f nats)\n", orders.size(),
                        bits_per_dim(nats, ckpt.config), nats);
        }
    }
    return 0;
}

int cmd_sample(const std::string& ckpt_path, const std::string& order_name,
               const std::string& out_path, uint64_t seed, double temperature) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const GenerationOrder order =
        order_by_name(order_name, ckpt.config.height, ckpt.config.width);
    MaskCache cache;
    std::mt19937_64 rng(seed);
    double log_prob = 0.0;
    const Tensor4 image = sample(ckpt.config, ckpt.params, cache, order, rng, temperature,
                                 &log_prob);
    save_pnm(image, 0, ckpt.config.levels() - 1, out_path);
    std::printf("sample: log prob %.4f nats, written to %s\n", log_prob, out_path.c_str());
    return 0;
}

ObservedSet hidden_region(const std::string& mask_name, int height, int width) {
    // The name designates the HIDDEN half; everything else is observed.
    ObservedSet obs(height, width);
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) obs.set(r, c, true);
    if (mask_name.rfind("file:", 0) == 0) {
        ObservedSet from_file = load_pbm_hidden(mask_name.substr(5));
        if (from_file.height != height || from_file.width != width) {
            throw std::invalid_argument("mask bitmap dims do not match the image");
        }
        return from_file;
    }
    if (mask_name == "top") {
        for (int r = 0; r < height / 2; ++r)
            for (int c = 0; c < width; ++c) obs.set(r, c, false);
    } else if (mask_name == "bottom") {
        for (int r = height - height / 2; r < height; ++r)
            for (int c = 0; c < width; ++c) obs.set(r, c, false);
    } else if (mask_name == "left") {
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width / 2; ++c) obs.set(r, c, false);
    } else if (mask_name == "right") {
        for (int r = 0; r < height; ++r)
            for (int c = width - width / 2; c < width; ++c) obs.set(r, c, false);
    } else {
        throw std::invalid_argument("unknown mask '" + mask_name +
                                    "' (expected top|bottom|left|right|file:<pbm>)");
    }
    return obs;
}

int cmd_complete(const std::string& ckpt_path, const std::string& image_path,
                 const std::string& mask_name, const std::string& out_path, uint64_t seed,
                 double temperature, int fill_variant) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Tensor4 image = load_pnm(image_path);
    if (image.channels() != ckpt.config.channels || image.height() != ckpt.config.height ||
        image.width() != ckpt.config.width) {
        throw std::invalid_argument("image " + image.shape_str() +
                                    " does not match the checkpointed model");
    }
    const ObservedSet observed =
        hidden_region(mask_name, ckpt.config.height, ckpt.config.width);
    const GenerationOrder order = max_context_order(observed, fill_variant);

    MaskCache cache;
    const double nll = conditional_nll(ckpt.config, ckpt.params, cache, image, observed, order);
    const int hidden = ckpt.config.height * ckpt.config.width - observed.count();
    std::printf("conditional nll over %d hidden pixels: %.4f nats (%.4f nats/pixel)\n", hidden,
                nll, hidden > 0 ? nll / hidden : 0.0);

    std::mt19937_64 rng(seed);
    const Tensor4 done =
        complete(ckpt.config, ckpt.params, cache, image, observed, order, rng, temperature);
    save_pnm(done, 0, ckpt.config.levels() - 1, out_path);
    std::printf("completion written to %s\n", out_path.c_str());
    return 0;
}

int cmd_verify(int grid, uint64_t seed, const std::string& dump_dir) {
    // Small randomly initialized model over every order family; the checks
    // are structural, so random parameters exercise them fully.
    ModelConfig model;
    model.channels = 1;
    model.height = grid;
    model.width = grid;
    model.hidden = 8;
    model.depth = 3;
    model.kernel = 3;
    model.dilations = {1, 2, 1};
    model.head = HeadKind::Binary;
    model.bits = 1;
    model.validate();
    const Parameters params = init_parameters(model, seed);
    MaskCache cache;

    bool all_pass = true;
    std::vector<std::pair<std::string, GenerationOrder>> orders;
    for (int v = 0; v < 8; ++v) {
        orders.emplace_back("s" + std::to_string(v), s_curve_order(grid, grid, v));
    }
    orders.emplace_back("hilbert", hilbert_order(grid, grid));
    orders.emplace_back("raster", raster_order(grid, grid));

    for (const auto& [name, order] : orders) {
        const LayerMasks masks = masks_for_order(cache, order, model);
        const CausalityReport rep = causality_jacobian_check(model, params, masks, order);
        std::printf("causality.%s.pass=%d\n", name.c_str(), rep.pass ? 1 : 0);
        std::printf("causality.%s.worst_abs=%.3e\n", name.c_str(), rep.worst_abs);
        if (!rep.pass) {
            std::printf("causality.%s.worst_pair=(%d,%d)\n", name.c_str(), rep.worst_i,
                        rep.worst_j);
            all_pass = false;
        }
        const BlindSpotReport blind = blind_spot_report(order, model);
        std::printf("blindspot.%s.pairs=%ld\n", name.c_str(), blind.blind_pairs);
        if (!dump_dir.empty()) {
            std::filesystem::create_directories(dump_dir);
            for (size_t l = 0; l < masks.size(); ++l) {
                save_mask(*masks[l], dump_dir + "/" + name + ".layer" + std::to_string(l) +
                                          ".lmcm");
            }
        }
    }

    // Dense depth so Hamiltonian-path orders reach every predecessor.
    {
        ModelConfig deep = model;
        deep.depth = grid * grid;
        deep.dilations.assign(static_cast<size_t>(deep.depth), 1);
        const BlindSpotReport blind = blind_spot_report(orders[0].second, deep);
        std::printf("blindspot.s0.full_depth.pairs=%ld\n", blind.blind_pairs);
        all_pass = all_pass && blind.full_context;
    }

    // Distribution validity on an exhaustive 2x2 binary model.
    {
        ModelConfig tiny;
        tiny.channels = 1;
        tiny.height = 2;
        tiny.width = 2;
        tiny.hidden = 6;
        tiny.depth = 2;
        tiny.kernel = 3;
        tiny.dilations = {1, 1};
        tiny.head = HeadKind::Binary;
        tiny.bits = 1;
        const Parameters tp = init_parameters(tiny, seed + 1);
        const GenerationOrder order = s_curve_order(2, 2, 0);
        double total = 0.0;
        for (int code = 0; code < 16; ++code) {
            Tensor4 image(1, 1, 2, 2);
            for (int bit = 0; bit < 4; ++bit) {
                image(0, 0, bit / 2, bit % 2) = (code >> bit) & 1;
            }
            total += std::exp(-joint_nll(tiny, tp, cache, order, image)[0]);
        }
        const bool ok = std::abs(total - 1.0) < 1e-6;
        std::printf("distribution.sum=%.12f\n", total);
        std::printf("distribution.pass=%d\n", ok ? 1 : 0);
        all_pass = all_pass && ok;
    }

    // Gradient check on a small random model and batch. Jittered biases
    // keep the check away from the zero-variance norm point where finite
    // differences degrade.
    {
        std::mt19937_64 rng(seed + 2);
        Parameters jittered = params;
        std::uniform_real_distribution<double> dist(-0.25, 0.25);
        for (NamedTensor& t : jittered.tensors) {
            for (double& v : t.values) v += dist(rng);
        }
        Tensor4 batch(2, 1, grid, grid);
        for (size_t i = 0; i < batch.size(); ++i) batch.data()[i] = rng() % 2;
        const GradCheckReport rep =
            gradient_check(model, jittered, cache, orders[0].second, batch);
        std::printf("gradcheck.max_rel_err=%.3e\n", rep.max_rel_err);
        std::printf("gradcheck.pass=%d\n", rep.pass ? 1 : 0);
        all_pass = all_pass && rep.pass;
    }

    std::printf("verify.pass=%d\n", all_pass ? 1 : 0);
    return all_pass ? 0 : 1;
}

int cmd_bench(int channels, int size, int hidden, int batch) {
    ModelConfig model;
    model.channels = channels;
    model.height = size;
    model.width = size;
    model.hidden = hidden;
    model.depth = 4;
    model.kernel = 3;
    model.dilations = {1, 2, 1, 2};
    model.head = channels == 3 ? HeadKind::LogisticMixture : HeadKind::Binary;
    model.bits = channels == 3 ? 8 : 1;
    model.n_mix = 2;
    model.validate();

    const Parameters params = init_parameters(model, 7);
    MaskCache cache;
    const GenerationOrder order = s_curve_order(size, size, 0);
    const LayerMasks masks = masks_for_order(cache, order, model);

    std::mt19937_64 rng(11);
    Tensor4 raw(batch, channels, size, size);
    for (size_t i = 0; i < raw.size(); ++i) {
        raw.data()[i] = static_cast<double>(rng() % static_cast<uint64_t>(model.levels()));
    }
    const Tensor4 input = rescale_to_unit(raw, model.bits);

    auto run = [&](bool store) {
        ForwardTape tape;
        const auto t0 = std::chrono::steady_clock::now();
        const Tensor4 out = net_forward(model, params, input, masks, &tape, store);
        const size_t retained = tape.retained_bytes();
        Tensor4 head_grad(out.batch(), out.channels(), out.height(), out.width());
        head_nll(model, out, raw, &head_grad, 1.0);
        Parameters grads = params.zeros_like();
        net_backward(model, params, tape, head_grad, grads);
        const auto t1 = std::chrono::steady_clock::now();
        return std::pair<double, size_t>(
            std::chrono::duration<double>(t1 - t0).count(), retained);
    };

    run(true);  // warm up
    const auto [t_store, bytes_store] = run(true);
    const auto [t_recompute, bytes_recompute] = run(false);
    std::printf("bench: %dx%dx%d hidden=%d batch=%d depth=%d\n", channels, size, size, hidden,
                batch, model.depth);
    std::printf("store-patches:  retained %.2f MiB between forward and backward, %.3f s\n",
                bytes_store / (1024.0 * 1024.0), t_store);
    std::printf("recompute:      retained %.2f MiB between forward and backward, %.3f s\n",
                bytes_recompute / (1024.0 * 1024.0), t_recompute);
    std::printf("memory ratio %.2fx, slowdown %.2fx\n",
                static_cast<double>(bytes_store) / static_cast<double>(bytes_recompute),
                t_recompute / t_store);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Order-agnostic autoregressive image model with locally masked convolutions"};
    app.require_subcommand(1);

    std::string config_path, ckpt_path, out_path, orders_csv, order_name, image_path, mask_name,
        dump_dir;
    uint64_t seed = 0;
    double temperature = 1.0;
    bool ensemble = false;
    int cap = 256, grid = 4, fill_variant = 0;
    int bench_channels = 1, bench_size = 16, bench_hidden = 32, bench_batch = 4;

    CLI::App* train = app.add_subcommand("train", "Train from a config file");
    train->add_option("--config", config_path, "key=value config file")->required();
    train->add_option("--out", out_path, "checkpoint output path")->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate NLL per order and as an ensemble");
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--config", config_path, "config naming the dataset")->required();
    eval->add_option("--orders", orders_csv, "comma list: s0..s7, raster, hilbert, file:<path>")
        ->required();
    eval->add_flag("--ensemble", ensemble, "also report the order-averaged NLL");
    eval->add_option("--cap", cap, "max images evaluated");

    CLI::App* sample_cmd = app.add_subcommand("sample", "Ancestral sampling to a PGM/PPM");
    sample_cmd->add_option("--ckpt", ckpt_path)->required();
    sample_cmd->add_option("--order", order_name)->required();
    sample_cmd->add_option("--out", out_path)->required();
    sample_cmd->add_option("--seed", seed);
    sample_cmd->add_option("--temperature", temperature);

    CLI::App* complete_cmd =
        app.add_subcommand("complete", "Fill a hidden region with maximum context");
    complete_cmd->add_option("--ckpt", ckpt_path)->required();
    complete_cmd->add_option("--image", image_path)->required();
    complete_cmd
        ->add_option("--mask", mask_name, "hidden region: top|bottom|left|right|file:<pbm>")
        ->required();
    complete_cmd->add_option("--out", out_path)->required();
    complete_cmd->add_option("--seed", seed);
    complete_cmd->add_option("--temperature", temperature);
    complete_cmd->add_option("--fill-variant", fill_variant, "s-curve variant for the order");

    CLI::App* verify_cmd = app.add_subcommand("verify", "Causality / gradient / validity checks");
    verify_cmd->add_option("--grid", grid, "grid side for the jacobian checks");
    verify_cmd->add_option("--seed", seed);
    verify_cmd->add_option("--dump-masks", dump_dir, "directory for LMCM mask dumps");

    CLI::App* bench_cmd =
        app.add_subcommand("bench", "Recompute vs store-patches backward report");
    bench_cmd->add_option("--channels", bench_channels);
    bench_cmd->add_option("--size", bench_size);
    bench_cmd->add_option("--hidden", bench_hidden);
    bench_cmd->add_option("--batch", bench_batch);

    try {
        app.parse(argc, argv);
        if (train->parsed()) return cmd_train(config_path, out_path);
        if (eval->parsed()) return cmd_eval(ckpt_path, config_path, orders_csv, ensemble, cap);
        if (sample_cmd->parsed()) {
            return cmd_sample(ckpt_path, order_name, out_path, seed, temperature);
        }
        if (complete_cmd->parsed()) {
            return cmd_complete(ckpt_path, image_path, mask_name, out_path, seed, temperature,
                                fill_variant);
        }
        if (verify_cmd->parsed()) return cmd_verify(grid, seed, dump_dir);
        if (bench_cmd->parsed()) {
            return cmd_bench(bench_channels, bench_size, bench_hidden, bench_batch);
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitUsage;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    }
    return 0;
}
