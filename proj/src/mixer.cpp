#include "bcp/mixer.hpp"

#include <random>

namespace bcp {

namespace {

Tensor select(const Tensor& fg, const Tensor& bg, const Mask& mask) {
    check_same_spatial(fg.shape(), mask.shape, "mix");
    check_same_spatial(bg.shape(), mask.shape, "mix");
    std::vector<double> out(mask.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = mask.bits[i] ? fg.values()[i] : bg.values()[i];
    }
    return Tensor(mask.shape, std::move(out));
}

LabelMap select(const LabelMap& fg, const LabelMap& bg, const Mask& mask,
                int num_classes) {
    check_same_spatial(fg.shape, mask.shape, "mix");
    check_same_spatial(bg.shape, mask.shape, "mix");
    LabelMap out{mask.shape, std::vector<std::uint8_t>(mask.size())};
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.classes[i] = mask.bits[i] ? fg.classes[i] : bg.classes[i];
        if (out.classes[i] >= num_classes) {
            throw std::invalid_argument("label class " + std::to_string(out.classes[i]) +
                                        " >= K=" + std::to_string(num_classes));
        }
    }
    return out;
}

}  // namespace

std::pair<Tensor, Tensor> bcp_mix_images(const Tensor& xl_j, const Tensor& xu_p,
                                         const Tensor& xl_i, const Tensor& xu_q,
                                         const Mask& mask) {
    return {select(xl_j, xu_p, mask), select(xu_q, xl_i, mask)};
}

std::pair<LabelMap, LabelMap> bcp_mix_labels(const LabelMap& yl_j, const LabelMap& yu_p,
                                             const LabelMap& yl_i, const LabelMap& yu_q,
                                             const Mask& mask, int num_classes) {
    return {select(yl_j, yu_p, mask, num_classes),
            select(yu_q, yl_i, mask, num_classes)};
}

Sample within_set_mix(const Sample& a1, const Sample& a2, const Mask& mask) {
    const int k = 256;  // class range already validated upstream; u8 bound
    return {select(a1.image, a2.image, mask), select(a1.target, a2.target, mask, k)};
}

SoftSample mixup_mix(const Tensor& x1, const Tensor& x2, const LabelMap& y1,
                     const LabelMap& y2, int num_classes, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("mixup gamma must lie in [0,1]");
    }
    check_same_spatial(x1.shape(), x2.shape(), "mixup");
    check_same_spatial(x1.shape(), y1.shape, "mixup");
    check_same_spatial(x1.shape(), y2.shape, "mixup");
    const std::size_t n = x1.size();
    std::vector<double> img(n);
    for (std::size_t i = 0; i < n; ++i) {
        img[i] = gamma * x1.values()[i] + (1.0 - gamma) * x2.values()[i];
    }
    SoftSample out;
    out.image = Tensor(x1.shape(), std::move(img));
    out.class_weights.assign(static_cast<std::size_t>(num_classes),
                             std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        out.class_weights[y1.classes[i]][i] += gamma;
        out.class_weights[y2.classes[i]][i] += 1.0 - gamma;
    }
    return out;
}

CutmixResult fg_cutmix_mix(const std::vector<Sample>& batch, int grid,
                           std::uint64_t seed) {
    if (batch.empty()) throw std::invalid_argument("fg_cutmix: empty batch");
    if (grid < 1) throw std::invalid_argument("fg_cutmix: grid must be >= 1");
    const auto& shape = batch[0].image.shape();
    if (shape.size() != 2) {
        throw std::invalid_argument("fg_cutmix expects 2-D samples, got " +
                                    shape_str(shape));
    }
    const std::size_t H = shape[0], W = shape[1];
    const auto g = static_cast<std::size_t>(grid);
    if (H % g != 0 || W % g != 0) {
        throw std::invalid_argument("fg_cutmix: dims " + shape_str(shape) +
                                    " not divisible by grid " + std::to_string(grid));
    }
    for (const auto& s : batch) {
        check_same_spatial(s.image.shape(), shape, "fg_cutmix");
        check_same_spatial(s.target.shape, shape, "fg_cutmix");
    }
    const std::size_t th = H / g, tw = W / g;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, batch.size() - 1);
    CutmixResult res;
    res.batch.resize(batch.size());
    res.source.assign(batch.size(), std::vector<std::size_t>(H * W));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        std::vector<double> img(H * W);
        LabelMap tgt{shape, std::vector<std::uint8_t>(H * W)};
        for (std::size_t ty = 0; ty < g; ++ty) {
            for (std::size_t tx = 0; tx < g; ++tx) {
                const std::size_t src = pick(rng);
                for (std::size_t y = ty * th; y < (ty + 1) * th; ++y) {
                    for (std::size_t x = tx * tw; x < (tx + 1) * tw; ++x) {
                        img[y * W + x] = batch[src].image.values()[y * W + x];
                        tgt.classes[y * W + x] = batch[src].target.classes[y * W + x];
                        res.source[b][y * W + x] = src;
                    }
                }
            }
        }
        res.batch[b] = {Tensor(shape, std::move(img)), std::move(tgt)};
    }
    return res;
}

}  // namespace bcp
