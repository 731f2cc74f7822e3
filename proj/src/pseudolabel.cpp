#include "bcp/pseudolabel.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace bcp {

LabelMap prob_to_label(const Tensor& prob, LabelMode mode) {
    const auto& s = prob.shape();
    if (s.size() < 2) {
        throw std::invalid_argument("prob_to_label expects [K, spatial...], got " +
                                    shape_str(s));
    }
    const std::size_t K = s[0];
    std::vector<std::size_t> spatial(s.begin() + 1, s.end());
    const std::size_t n = numel(spatial);
    const double* p = prob.values().data();
    for (std::size_t v = 0; v < n; ++v) {
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k) sum += p[k * n + v];
        if (std::abs(sum - 1.0) > 1e-6) {
            throw std::invalid_argument("prob_to_label: per-voxel sum " +
                                        std::to_string(sum) + " deviates from 1");
        }
    }
    LabelMap out{spatial, std::vector<std::uint8_t>(n, 0)};
    if (mode == LabelMode::binary) {
        if (K != 2) {
            throw std::invalid_argument("binary mode requires K=2, got K=" +
                                        std::to_string(K));
        }
        for (std::size_t v = 0; v < n; ++v) out.classes[v] = p[n + v] > 0.5 ? 1 : 0;
    } else {
        for (std::size_t v = 0; v < n; ++v) {
            std::size_t best = 0;
            for (std::size_t k = 1; k < K; ++k) {
                if (p[k * n + v] > p[best * n + v]) best = k;
            }
            out.classes[v] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

namespace {

std::vector<std::size_t> face_neighbors(std::size_t lin,
                                        const std::vector<std::size_t>& shape,
                                        const std::vector<std::size_t>& stride) {
    std::vector<std::size_t> out;
    std::size_t rem = lin;
    for (std::size_t d = 0; d < shape.size(); ++d) {
        const std::size_t coord = rem / stride[d];
        rem %= stride[d];
        if (coord > 0) out.push_back(lin - stride[d]);
        if (coord + 1 < shape[d]) out.push_back(lin + stride[d]);
    }
    return out;
}

}  // namespace

LabelMap largest_connected_component(const LabelMap& label) {
    const auto& shape = label.shape;
    const std::size_t n = label.size();
    std::vector<std::size_t> stride(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        stride[static_cast<std::size_t>(i)] =
            stride[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    }
    LabelMap out{shape, std::vector<std::uint8_t>(n, 0)};
    std::vector<std::int32_t> comp(n, -1);
    // components found per class: (size, min linear index, id)
    struct CompInfo {
        std::size_t size = 0;
        std::size_t min_voxel = 0;
    };
    std::uint8_t max_class = 0;
    for (std::uint8_t c : label.classes) max_class = std::max(max_class, c);
    for (std::uint8_t cls = 1; cls <= max_class; ++cls) {
        std::fill(comp.begin(), comp.end(), -1);
        std::vector<CompInfo> comps;
        for (std::size_t seed = 0; seed < n; ++seed) {
            if (label.classes[seed] != cls || comp[seed] >= 0) continue;
            const auto id = static_cast<std::int32_t>(comps.size());
            CompInfo info{0, seed};
            std::queue<std::size_t> q;
            comp[seed] = id;
            q.push(seed);
            while (!q.empty()) {
                const std::size_t v = q.front();
                q.pop();
                ++info.size;
                for (std::size_t nb : face_neighbors(v, shape, stride)) {
                    if (label.classes[nb] == cls && comp[nb] < 0) {
                        comp[nb] = id;
                        q.push(nb);
                    }
                }
            }
            comps.push_back(info);
        }
        if (comps.empty()) continue;
        std::size_t best = 0;
        for (std::size_t i = 1; i < comps.size(); ++i) {
            if (comps[i].size > comps[best].size ||
                (comps[i].size == comps[best].size &&
                 comps[i].min_voxel < comps[best].min_voxel)) {
                best = i;
            }
        }
        for (std::size_t v = 0; v < n; ++v) {
            if (comp[v] == static_cast<std::int32_t>(best)) out.classes[v] = cls;
        }
    }
    return out;
}

LabelMap make_pseudo_labels(const ModelParams& teacher, const NetConfig& cfg,
                            const Tensor& x_u, LabelMode mode, bool use_lcc) {
    const auto& s = x_u.shape();
    if (s.size() != 2) {
        throw std::invalid_argument("make_pseudo_labels expects a [H,W] image, got " +
                                    shape_str(s));
    }
    // teacher params carry requires_grad=false and no tape is active here,
    // so nothing is recorded
    Tensor x({1, 1, s[0], s[1]}, x_u.values());
    Tensor probs = softmax_channels(forward(teacher, cfg, x));
    const std::size_t K = probs.shape()[1];
    Tensor prob_k({K, s[0], s[1]}, probs.values());
    LabelMap lab = prob_to_label(prob_k, mode);
    return use_lcc ? largest_connected_component(lab) : lab;
}

}  // namespace bcp
