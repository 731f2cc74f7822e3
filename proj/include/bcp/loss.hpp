#pragma once

#include <vector>

#include "bcp/maskgen.hpp"
#include "bcp/volume.hpp"

namespace bcp {

struct LossConfig {
    double alpha = 0.5;      // weight of pseudo-supervised voxels
    double dice_weight = 0.5;
    double ce_weight = 0.5;
    double dice_eps = 1e-5;
};

struct LossReport {
    Tensor l_in;   // scalar, differentiable
    Tensor l_out;  // scalar, differentiable
    Tensor l_all;  // l_in + l_out
    double dice_in = 0.0, ce_in = 0.0;
    double dice_out = 0.0, ce_out = 0.0;
    bool zero_weight_flagged = false;
};

/// -log q[y] per voxel (q clamped at 1e-12): q is [B,K,...], y one map
/// per batch element. Returns [B,1,...], differentiable in q.
Tensor per_voxel_ce(const Tensor& q, const std::vector<LabelMap>& y);

/// Voxel-weighted soft Dice loss averaged over non-background classes:
/// per class c, 1 - (2*sum(w*q_c*[y==c]) + eps)/(sum(w*q_c) + sum(w*[y==c]) + eps).
/// w is [1,1,...] or [B,1,...] and broadcasts over the batch.
Tensor weighted_dice(const Tensor& q, const std::vector<LabelMap>& y, const Tensor& w,
                     double eps = 1e-5);

/// Cross-entropy against soft per-class targets (Mixup arm):
/// mean(w * sum_k t_k * -log q_k) / mean(w).
Tensor soft_ce(const Tensor& q, const Tensor& soft_targets, const Tensor& w);

/// Direction losses with provenance weights w_in = M + alpha*(1-M) and
/// w_out = (1-M) + alpha*M; each direction is
/// ce_weight*mean(w*ce)/mean(w) + dice_weight*weighted_dice; l_all = l_in + l_out.
LossReport bcp_loss(const Tensor& q_in, const Tensor& q_out,
                    const std::vector<LabelMap>& y_in,
                    const std::vector<LabelMap>& y_out, const Mask& mask,
                    const LossConfig& cfg);

/// One-direction loss with an explicit weight map (pretraining and the
/// ablation arms reuse it).
Tensor seg_loss(const Tensor& q, const std::vector<LabelMap>& y, const Tensor& w,
                const LossConfig& cfg, double* dice_part = nullptr,
                double* ce_part = nullptr);

/// Weight map M + alpha*(1-M) as a [1,1,spatial] tensor; invert swaps
/// the roles of M and 1-M.
Tensor provenance_weights(const Mask& mask, double alpha, bool invert);

}  // namespace bcp
