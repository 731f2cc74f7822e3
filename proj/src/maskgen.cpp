#include "bcp/maskgen.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bcp {

namespace {

void check_beta(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) {
        throw std::invalid_argument("beta must lie in (0,1), got " + std::to_string(beta));
    }
}

std::vector<std::size_t> block_extents(const std::vector<std::size_t>& shape, double beta) {
    std::vector<std::size_t> ext(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) {
        ext[i] = static_cast<std::size_t>(std::floor(beta * static_cast<double>(shape[i])));
        if (ext[i] < 1) {
            throw std::invalid_argument("beta " + std::to_string(beta) +
                                        " yields an empty block on dim of extent " +
                                        std::to_string(shape[i]));
        }
    }
    return ext;
}

// Clears an axis-aligned block [offset, offset+extent) in a mask.
void clear_block(Mask& m, const std::vector<std::size_t>& offset,
                 const std::vector<std::size_t>& extent) {
    const std::size_t rank = m.shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::vector<std::size_t> stride(rank, 1);
    for (int i = static_cast<int>(rank) - 2; i >= 0; --i) {
        stride[i] = stride[i + 1] * m.shape[i + 1];
    }
    const std::size_t n = numel(extent);
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t lin = 0;
        for (std::size_t i = 0; i < rank; ++i) lin += (offset[i] + idx[i]) * stride[i];
        m.bits[lin] = 0;
        for (int i = static_cast<int>(rank) - 1; i >= 0; --i) {
            if (++idx[i] < extent[i]) break;
            idx[i] = 0;
        }
    }
}

}  // namespace

MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "zero_centered") return MaskStrategy::zero_centered;
    if (s == "random_cubes") return MaskStrategy::random_cubes;
    if (s == "contact") return MaskStrategy::contact;
    throw std::invalid_argument("unknown mask strategy: " + s);
}

std::string to_string(MaskStrategy s) {
    switch (s) {
        case MaskStrategy::zero_centered: return "zero_centered";
        case MaskStrategy::random_cubes: return "random_cubes";
        case MaskStrategy::contact: return "contact";
    }
    return "?";
}

Mask gen_zero_centered(const std::vector<std::size_t>& shape, double beta) {
    check_beta(beta);
    auto ext = block_extents(shape, beta);
    std::vector<std::size_t> off(shape.size());
    for (std::size_t i = 0; i < shape.size(); ++i) off[i] = (shape[i] - ext[i]) / 2;
    Mask m{shape, std::vector<std::uint8_t>(numel(shape), 1)};
    clear_block(m, off, ext);
    return m;
}

Mask gen_random_cubes(const std::vector<std::size_t>& shape, double beta, int n_cubes,
                      std::uint64_t seed) {
    check_beta(beta);
    if (n_cubes < 1) throw std::invalid_argument("n_cubes must be >= 1");
    auto ext = block_extents(shape, beta);
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (ext[i] > shape[i]) {
            throw std::invalid_argument("cube extent exceeds volume on dim " +
                                        std::to_string(i));
        }
    }
    Mask m{shape, std::vector<std::uint8_t>(numel(shape), 1)};
    std::mt19937_64 rng(seed);
    std::vector<std::size_t> off(shape.size());
    for (int c = 0; c < n_cubes; ++c) {
        for (std::size_t i = 0; i < shape.size(); ++i) {
            std::uniform_int_distribution<std::size_t> dist(0, shape[i] - ext[i]);
            off[i] = dist(rng);
        }
        clear_block(m, off, ext);
    }
    return m;
}

Mask gen_contact(const std::vector<std::size_t>& shape, double beta, int axis, int side) {
    check_beta(beta);
    if (axis < 0 || static_cast<std::size_t>(axis) >= shape.size()) {
        throw std::invalid_argument("contact axis " + std::to_string(axis) +
                                    " out of range for rank " +
                                    std::to_string(shape.size()));
    }
    if (side != 0 && side != 1) throw std::invalid_argument("side must be 0 or 1");
    std::vector<std::size_t> ext = shape;
    const auto slab = static_cast<std::size_t>(
        std::floor(beta * static_cast<double>(shape[static_cast<std::size_t>(axis)])));
    if (slab < 1) throw std::invalid_argument("beta yields an empty contact slab");
    ext[static_cast<std::size_t>(axis)] = slab;
    std::vector<std::size_t> off(shape.size(), 0);
    if (side == 1) {
        off[static_cast<std::size_t>(axis)] = shape[static_cast<std::size_t>(axis)] - slab;
    }
    Mask m{shape, std::vector<std::uint8_t>(numel(shape), 1)};
    clear_block(m, off, ext);
    return m;
}

Mask gen_mask(const MaskSpec& spec, const std::vector<std::size_t>& shape,
              std::uint64_t draw_seed) {
    switch (spec.strategy) {
        case MaskStrategy::zero_centered: {
            if (!spec.random_offset) return gen_zero_centered(shape, spec.beta);
            check_beta(spec.beta);
            auto ext = block_extents(shape, spec.beta);
            std::mt19937_64 rng(draw_seed);
            std::vector<std::size_t> off(shape.size());
            for (std::size_t i = 0; i < shape.size(); ++i) {
                std::uniform_int_distribution<std::size_t> dist(0, shape[i] - ext[i]);
                off[i] = dist(rng);
            }
            Mask m{shape, std::vector<std::uint8_t>(numel(shape), 1)};
            clear_block(m, off, ext);
            return m;
        }
        case MaskStrategy::random_cubes:
            return gen_random_cubes(shape, spec.beta, spec.n_cubes, draw_seed);
        case MaskStrategy::contact:
            return gen_contact(shape, spec.beta, spec.axis, spec.side);
    }
    throw std::logic_error("unreachable mask strategy");
}

double zero_fraction(const Mask& mask) {
    std::size_t zeros = 0;
    for (std::uint8_t b : mask.bits) zeros += (b == 0);
    return static_cast<double>(zeros) / static_cast<double>(mask.bits.size());
}

}  // namespace bcp
