#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "bcp/tensor.hpp"

namespace bcp {

/// Binary mix mask over a 2-D or 3-D spatial grid. 0 marks the
/// copied-crop (foreground) region, 1 the background image.
struct Mask {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
};

/// Integer class map; background is class 0, every voxel < K.
struct LabelMap {
    std::vector<std::size_t> shape;
    std::vector<std::uint8_t> classes;

    std::size_t size() const { return classes.size(); }
    bool operator==(const LabelMap&) const = default;
};

inline void check_same_spatial(const std::vector<std::size_t>& a,
                               const std::vector<std::size_t>& b,
                               const char* what) {
    if (a != b) {
        throw std::invalid_argument(std::string(what) + ": spatial shape mismatch " +
                                    shape_str(a) + " vs " + shape_str(b));
    }
}

}  // namespace bcp
