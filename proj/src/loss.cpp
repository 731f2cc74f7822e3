#include "bcp/loss.hpp"

namespace bcp {

namespace {

// Validates q [B,K,spatial...] against the per-batch label maps and
// returns {B, K, spatial voxel count}.
std::tuple<std::size_t, std::size_t, std::size_t> check_q_labels(
    const Tensor& q, const std::vector<LabelMap>& y) {
    const auto& s = q.shape();
    if (s.size() < 3) {
        throw std::invalid_argument("expected probs [B,K,spatial...], got " +
                                    shape_str(s));
    }
    const std::size_t B = s[0], K = s[1];
    if (y.size() != B) {
        throw std::invalid_argument("batch size mismatch: probs " + std::to_string(B) +
                                    " vs " + std::to_string(y.size()) + " label maps");
    }
    std::vector<std::size_t> spatial(s.begin() + 2, s.end());
    for (const auto& lm : y) {
        check_same_spatial(lm.shape, spatial, "loss labels");
        for (std::uint8_t c : lm.classes) {
            if (c >= K) {
                throw std::invalid_argument("label class " + std::to_string(c) +
                                            " out of range for K=" + std::to_string(K));
            }
        }
    }
    return {B, K, numel(spatial)};
}

// One-hot indicator of class c as a constant [B,1,spatial] tensor.
Tensor indicator(const std::vector<LabelMap>& y, std::size_t c,
                 const std::vector<std::size_t>& full_shape) {
    std::vector<std::size_t> shape = full_shape;
    shape[1] = 1;
    std::vector<double> v(numel(shape), 0.0);
    const std::size_t n = numel(shape) / y.size();
    for (std::size_t b = 0; b < y.size(); ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            if (y[b].classes[i] == c) v[b * n + i] = 1.0;
        }
    }
    return Tensor(std::move(shape), std::move(v));
}

}  // namespace

Tensor per_voxel_ce(const Tensor& q, const std::vector<LabelMap>& y) {
    auto [B, K, n] = check_q_labels(q, y);
    Tensor nll = neg_log_clamped(q);
    Tensor acc;
    for (std::size_t c = 0; c < K; ++c) {
        Tensor term = mul(slice_channel(nll, c), indicator(y, c, q.shape()));
        acc = acc.defined() ? add(acc, term) : term;
    }
    return acc;
}

Tensor weighted_dice(const Tensor& q, const std::vector<LabelMap>& y, const Tensor& w,
                     double eps) {
    auto [B, K, n] = check_q_labels(q, y);
    for (double v : w.values()) {
        if (v < 0.0) throw std::invalid_argument("dice weights must be >= 0");
    }
    Tensor eps_t = Tensor::scalar(eps);
    Tensor total;
    for (std::size_t c = 1; c < K; ++c) {
        Tensor qc = slice_channel(q, c);
        Tensor ind = indicator(y, c, q.shape());
        Tensor inter = reduce_sum(mul(w, mul(qc, ind)));
        Tensor pred_sum = reduce_sum(mul(w, qc));
        Tensor true_sum = reduce_sum(mul(w, ind));
        Tensor num = add(add(inter, inter), eps_t);
        Tensor den = add(add(pred_sum, true_sum), eps_t);
        Tensor loss_c = sub(Tensor::scalar(1.0), div(num, den));
        total = total.defined() ? add(total, loss_c) : loss_c;
    }
    if (K < 2) throw std::invalid_argument("weighted_dice requires K >= 2");
    return div(total, Tensor::scalar(static_cast<double>(K - 1)));
}

Tensor soft_ce(const Tensor& q, const Tensor& soft_targets, const Tensor& w) {
    if (q.shape() != soft_targets.shape()) {
        throw std::invalid_argument("soft_ce shape mismatch: " + shape_str(q.shape()) +
                                    " vs " + shape_str(soft_targets.shape()));
    }
    Tensor nll = sum_channels(mul(soft_targets, neg_log_clamped(q)));
    return div(reduce_mean(mul(w, nll)), reduce_mean(w));
}

Tensor provenance_weights(const Mask& mask, double alpha, bool invert) {
    if (alpha <= 0.0) throw std::invalid_argument("alpha must be > 0");
    std::vector<std::size_t> shape{1, 1};
    shape.insert(shape.end(), mask.shape.begin(), mask.shape.end());
    std::vector<double> v(mask.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const bool one = invert ? mask.bits[i] == 0 : mask.bits[i] == 1;
        v[i] = one ? 1.0 : alpha;
    }
    return Tensor(std::move(shape), std::move(v));
}

Tensor seg_loss(const Tensor& q, const std::vector<LabelMap>& y, const Tensor& w,
                const LossConfig& cfg, double* dice_part, double* ce_part) {
    if (cfg.dice_weight < 0 || cfg.ce_weight < 0 ||
        (cfg.dice_weight == 0 && cfg.ce_weight == 0)) {
        throw std::invalid_argument("dice/ce weights must be >= 0 and not both zero");
    }
    double wsum = 0.0;
    for (double v : w.values()) wsum += v;
    if (wsum == 0.0) {
        // all-zero weights contribute nothing; caller flags it in the report
        if (dice_part) *dice_part = 0.0;
        if (ce_part) *ce_part = 0.0;
        return Tensor::scalar(0.0);
    }
    Tensor ce = div(reduce_mean(mul(w, per_voxel_ce(q, y))), reduce_mean(w));
    Tensor dice = weighted_dice(q, y, w, cfg.dice_eps);
    if (ce_part) *ce_part = ce.item();
    if (dice_part) *dice_part = dice.item();
    return add(mul(Tensor::scalar(cfg.ce_weight), ce),
               mul(Tensor::scalar(cfg.dice_weight), dice));
}

LossReport bcp_loss(const Tensor& q_in, const Tensor& q_out,
                    const std::vector<LabelMap>& y_in,
                    const std::vector<LabelMap>& y_out, const Mask& mask,
                    const LossConfig& cfg) {
    LossReport rep;
    Tensor w_in = provenance_weights(mask, cfg.alpha, false);
    Tensor w_out = provenance_weights(mask, cfg.alpha, true);
    rep.l_in = seg_loss(q_in, y_in, w_in, cfg, &rep.dice_in, &rep.ce_in);
    rep.l_out = seg_loss(q_out, y_out, w_out, cfg, &rep.dice_out, &rep.ce_out);
    rep.l_all = add(rep.l_in, rep.l_out);
    return rep;
}

}  // namespace bcp
