#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "bcp/maskgen.hpp"
#include "bcp/volume.hpp"

namespace bcp {

/// One image with its supervision target, spatial shape shared with the
/// mask that produced it.
struct Sample {
    Tensor image;    // spatial shape only, e.g. [H,W]
    LabelMap target;
};

/// Soft supervision: per-class weight maps, K x spatial.
struct SoftSample {
    Tensor image;
    std::vector<std::vector<double>> class_weights;  // [K][voxels]
};

/// x_in = xl_j (*) M + xu_p (*) (1-M); x_out = xu_q (*) M + xl_i (*) (1-M).
std::pair<Tensor, Tensor> bcp_mix_images(const Tensor& xl_j, const Tensor& xu_p,
                                         const Tensor& xl_i, const Tensor& xu_q,
                                         const Mask& mask);

/// Same selection applied to class maps; never blends classes.
std::pair<LabelMap, LabelMap> bcp_mix_labels(const LabelMap& yl_j, const LabelMap& yu_p,
                                             const LabelMap& yl_i, const LabelMap& yu_q,
                                             const Mask& mask, int num_classes);

/// a1 (*) M + a2 (*) (1-M) on image and target alike (within-set CP arm,
/// also the pretraining mixer).
Sample within_set_mix(const Sample& a1, const Sample& a2, const Mask& mask);

/// gamma*x1 + (1-gamma)*x2 with targets blended as soft class weights.
SoftSample mixup_mix(const Tensor& x1, const Tensor& x2, const LabelMap& y1,
                     const LabelMap& y2, int num_classes, double gamma);

/// Tiles every batch member into grid x grid patches; each output tile
/// position draws its source member uniformly. Image and target move
/// together. Returns a per-voxel source index map per output sample.
struct CutmixResult {
    std::vector<Sample> batch;
    std::vector<std::vector<std::size_t>> source;  // [sample][voxel] -> input index
};

CutmixResult fg_cutmix_mix(const std::vector<Sample>& batch, int grid, std::uint64_t seed);

}  // namespace bcp
