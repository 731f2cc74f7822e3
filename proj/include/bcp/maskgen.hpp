#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bcp/volume.hpp"

namespace bcp {

enum class MaskStrategy { zero_centered, random_cubes, contact };

struct MaskSpec {
    MaskStrategy strategy = MaskStrategy::zero_centered;
    double beta = 2.0 / 3.0;  // zero-region side ratio, in (0,1)
    int n_cubes = 27;         // random_cubes only
    int axis = 0;             // contact only
    int side = 0;             // contact only: 0 = low face, 1 = high face
    bool random_offset = false;  // zero_centered: uniform offset instead of centered
    std::uint64_t seed = 0;
};

MaskStrategy mask_strategy_from_string(const std::string& s);
std::string to_string(MaskStrategy s);

/// Single axis-aligned zero block of extent floor(beta*d) per dim,
/// offset floor((d - floor(beta*d))/2).
Mask gen_zero_centered(const std::vector<std::size_t>& shape, double beta);

/// n_cubes uniformly placed zero blocks (overlap allowed), deterministic
/// in seed.
Mask gen_random_cubes(const std::vector<std::size_t>& shape, double beta, int n_cubes,
                      std::uint64_t seed);

/// Slab of extent floor(beta*d_axis) along `axis`, full on other dims,
/// flush against the chosen face.
Mask gen_contact(const std::vector<std::size_t>& shape, double beta, int axis, int side);

/// Dispatch on spec.strategy; rng drives per-draw placement seeds.
Mask gen_mask(const MaskSpec& spec, const std::vector<std::size_t>& shape,
              std::uint64_t draw_seed);

double zero_fraction(const Mask& mask);

}  // namespace bcp
