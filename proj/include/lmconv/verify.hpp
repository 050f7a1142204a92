#pragma once

#include <string>
#include <vector>

#include "lmconv/engine.hpp"

namespace lmconv {

struct JacobianViolation {
    int i = 0;  // order position of the output
    int j = 0;  // order position of the perturbed input
    double magnitude = 0.0;
};

struct MaskAuditIssue {
    int layer = 0;
    int i = 0;  // order position of the output column
    int j = 0;  // order position of the referenced cell
};

struct CausalityReport {
    bool pass = true;
    double worst_abs = 0.0;
    int worst_i = -1;
    int worst_j = -1;
    long checked_pairs = 0;
    std::vector<JacobianViolation> violations;  // |entry| >= threshold
    std::vector<MaskAuditIssue> mask_issues;    // structural audit findings
};

/// Central-difference Jacobian of head outputs w.r.t. model inputs on the
/// full grid: entries d out[pi(i)] / d x[pi(j)] with j >= i must vanish.
/// Masked-out inputs produce bit-identical passes, so true zeros come out
/// exactly zero; violations show up at O(1). Also audits every mask bit
/// structurally, which attributes faults to a layer.
CausalityReport causality_jacobian_check(const ModelConfig& config, const Parameters& params,
                                         const LayerMasks& masks, const GenerationOrder& order,
                                         double threshold = 1e-8, double fd_step = 1e-5,
                                         uint64_t input_seed = 0);

/// Structural pass over the masks: first-layer bits must reference strict
/// predecessors, deeper-layer bits predecessors or the center cell.
std::vector<MaskAuditIssue> audit_masks(const LayerMasks& masks, const GenerationOrder& order);

struct BlindSpotReport {
    std::vector<int> reachable_predecessors;  // per order position
    long blind_pairs = 0;                     // strict predecessors out of reach
    bool full_context = false;
};

/// Receptive-field coverage at the model's depth/dilation schedule.
BlindSpotReport blind_spot_report(const GenerationOrder& order, const ModelConfig& config);

struct GradCheckReport {
    bool pass = true;
    double max_rel_err = 0.0;
    std::string worst_tensor;
    size_t worst_index = 0;
};

/// Central finite differences (step fd_step) of the summed batch NLL against
/// the analytic backward, over every parameter entry and every model input
/// entry. rel err uses |a-f| / max(|a|,|f|,1.0); entries where both sides
/// are < atol are skipped.
GradCheckReport gradient_check(const ModelConfig& config, const Parameters& params,
                               MaskCache& cache, const GenerationOrder& order,
                               const Tensor4& raw_batch, double fd_step = 1e-5,
                               double tol = 1e-4, double atol = 1e-7);

struct OrderGenReport {
    double train_bpd = 0.0;    // mean over the training orders
    double heldout_bpd = 0.0;
    double ratio = 0.0;
};

/// Mean test-set bpd under each training order vs. under a held-out order.
OrderGenReport order_generalization_eval(const ModelConfig& config, const Parameters& params,
                                         MaskCache& cache,
                                         const std::vector<GenerationOrder>& train_orders,
                                         const GenerationOrder& heldout,
                                         const Tensor4& test_images);

}  // namespace lmconv
