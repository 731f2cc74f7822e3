#pragma once

#include "bcp/segnet.hpp"
#include "bcp/volume.hpp"

namespace bcp {

enum class LabelMode { binary, multiclass };

/// Threshold (binary: fg iff p(fg) > 0.5) or argmax with lowest-index
/// tie-break; prob is [K, spatial...], per-voxel channel sums must be 1.
LabelMap prob_to_label(const Tensor& prob, LabelMode mode);

/// Per non-background class, keeps only the largest face-connected
/// component (4-connectivity 2D, 6-connectivity 3D); removed voxels
/// become background. Ties go to the component with the smallest
/// min voxel in row-major order.
LabelMap largest_connected_component(const LabelMap& label);

/// Teacher-side pipeline: forward (no gradient recording) -> softmax ->
/// prob_to_label -> optional LCC. x_u is a single image [Cin,H,W]-less,
/// spatial [H,W]; the batch/channel dims are added internally.
LabelMap make_pseudo_labels(const ModelParams& teacher, const NetConfig& cfg,
                            const Tensor& x_u, LabelMode mode, bool use_lcc);

}  // namespace bcp
