#include "lmconv/verify.hpp"

#include <cmath>

namespace lmconv {

std::vector<MaskAuditIssue> audit_masks(const LayerMasks& masks, const GenerationOrder& order) {
    std::vector<MaskAuditIssue> issues;
    const int h = order.height();
    const int w = order.width();
    for (size_t layer = 0; layer < masks.size(); ++layer) {
        const MaskMatrix& mask = *masks[layer];
        const MaskMeta& m = mask.meta();
        const int k1 = m.k1, k2 = m.k2, d = m.dilation;
        for (int i = 0; i < order.size(); ++i) {
            const Coord out = order.at(i);
            const int col = w * out.row + out.col;
            for (int row = 0; row < mask.rows(); ++row) {
                if (!mask.bit(row, col)) continue;
                const int offset = row % m.patch_rows();
                const int dr = offset / k2;
                const int dc = offset % k2;
                const int rr = out.row + d * (dr - k1 / 2);
                const int cc = out.col + d * (dc - k2 / 2);
                if (rr < 0 || rr >= h || cc < 0 || cc >= w) {
                    issues.push_back({static_cast<int>(layer), i, -1});  // pad bit must be 0
                    continue;
                }
                const int j = order.index_of({rr, cc});
                const bool ok = m.first_layer ? j < i : j <= i;
                if (!ok) issues.push_back({static_cast<int>(layer), i, j});
            }
        }
    }
    return issues;
}

CausalityReport causality_jacobian_check(const ModelConfig& config, const Parameters& params,
                                         const LayerMasks& masks, const GenerationOrder& order,
                                         double threshold, double fd_step, uint64_t input_seed) {
    CausalityReport report;
    report.mask_issues = audit_masks(masks, order);

    std::mt19937_64 rng(input_seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Tensor4 x(1, config.channels, config.height, config.width);
    for (int ch = 0; ch < config.channels; ++ch)
        for (int r = 0; r < config.height; ++r)
            for (int c = 0; c < config.width; ++c) x(0, ch, r, c) = dist(rng);

    const int p = config.head_channels();
    for (int jc = 0; jc < order.size(); ++jc) {
        const Coord cell = order.at(jc);
        for (int ch = 0; ch < config.channels; ++ch) {
            const double saved = x(0, ch, cell.row, cell.col);
            x(0, ch, cell.row, cell.col) = saved + fd_step;
            const Tensor4 out_plus = net_forward(config, params, x, masks);
            x(0, ch, cell.row, cell.col) = saved - fd_step;
            const Tensor4 out_minus = net_forward(config, params, x, masks);
            x(0, ch, cell.row, cell.col) = saved;

            for (int i = 0; i <= jc; ++i) {
                const Coord oc = order.at(i);
                double worst = 0.0;
                for (int pc = 0; pc < p; ++pc) {
                    const double entry = (out_plus(0, pc, oc.row, oc.col) -
                                          out_minus(0, pc, oc.row, oc.col)) /
                                         (2.0 * fd_step);
                    worst = std::max(worst, std::abs(entry));
                }
                if (worst > report.worst_abs) {
                    report.worst_abs = worst;
                    report.worst_i = i;
                    report.worst_j = jc;
                }
                if (worst >= threshold) {
                    report.violations.push_back({i, jc, worst});
                }
                ++report.checked_pairs;
            }
        }
    }
    report.pass = report.violations.empty() && report.mask_issues.empty();
    return report;
}

BlindSpotReport blind_spot_report(const GenerationOrder& order, const ModelConfig& config) {
    const Reachability reach =
        receptive_field_closure(order, config.kernel, config.kernel, config.dilations);
    BlindSpotReport report;
    const int n = order.size();
    report.reachable_predecessors.assign(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        int hits = 0;
        for (int j = 0; j < i; ++j) hits += reach.at(i, j) ? 1 : 0;
        report.reachable_predecessors[static_cast<size_t>(i)] = hits;
        report.blind_pairs += i - hits;
    }
    report.full_context = report.blind_pairs == 0;
    return report;
}

GradCheckReport gradient_check(const ModelConfig& config, const Parameters& params,
                               MaskCache& cache, const GenerationOrder& order,
                               const Tensor4& raw_batch, double fd_step, double tol,
                               double atol) {
    const LayerMasks masks = masks_for_order(cache, order, config);
    const Tensor4 input = rescale_to_unit(raw_batch, config.bits);

    auto loss_of = [&](const Parameters& p, const Tensor4& x) {
        const Tensor4 out = net_forward(config, p, x, masks);
        double total = 0.0;
        for (double v : head_nll(config, out, raw_batch)) total += v;
        return total;
    };

    Parameters grads = params.zeros_like();
    Tensor4 grad_x;
    {
        ForwardTape tape;
        const Tensor4 out = net_forward(config, params, input, masks, &tape);
        Tensor4 head_grad(out.batch(), out.channels(), out.height(), out.width());
        head_nll(config, out, raw_batch, &head_grad, 1.0);
        net_backward(config, params, tape, head_grad, grads, &grad_x);
    }

    GradCheckReport report;
    auto consider = [&](double fd, double an, const std::string& name, size_t idx) {
        if (std::abs(fd) < atol && std::abs(an) < atol) return;
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1.0});
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_tensor = name;
            report.worst_index = idx;
        }
    };

    Parameters probe = params;
    for (size_t t = 0; t < params.tensors.size(); ++t) {
        for (size_t idx = 0; idx < params.tensors[t].values.size(); ++idx) {
            const double saved = probe.tensors[t].values[idx];
            probe.tensors[t].values[idx] = saved + fd_step;
            const double up = loss_of(probe, input);
            probe.tensors[t].values[idx] = saved - fd_step;
            const double down = loss_of(probe, input);
            probe.tensors[t].values[idx] = saved;
            consider((up - down) / (2.0 * fd_step), grads.tensors[t].values[idx],
                     params.tensors[t].name, idx);
        }
    }

    Tensor4 x_probe = input;
    for (size_t idx = 0; idx < x_probe.size(); ++idx) {
        const double saved = x_probe.data()[idx];
        x_probe.data()[idx] = saved + fd_step;
        const double up = loss_of(params, x_probe);
        x_probe.data()[idx] = saved - fd_step;
        const double down = loss_of(params, x_probe);
        x_probe.data()[idx] = saved;
        consider((up - down) / (2.0 * fd_step), grad_x.data()[idx], "input", idx);
    }

    report.pass = report.max_rel_err < tol;
    return report;
}

OrderGenReport order_generalization_eval(const ModelConfig& config, const Parameters& params,
                                         MaskCache& cache,
                                         const std::vector<GenerationOrder>& train_orders,
                                         const GenerationOrder& heldout,
                                         const Tensor4& test_images) {
    if (train_orders.empty()) {
        throw std::invalid_argument("order_generalization_eval: empty train order set");
    }
    auto mean_bpd = [&](const GenerationOrder& order) {
        const std::vector<double> nll = joint_nll(config, params, cache, order, test_images);
        double acc = 0.0;
        for (double v : nll) acc += bits_per_dim(v, config);
        return acc / static_cast<double>(nll.size());
    };
    OrderGenReport report;
    double acc = 0.0;
    for (const GenerationOrder& order : train_orders) acc += mean_bpd(order);
    report.train_bpd = acc / static_cast<double>(train_orders.size());
    report.heldout_bpd = mean_bpd(heldout);
    report.ratio = report.heldout_bpd / report.train_bpd;
    return report;
}

}  // namespace lmconv
