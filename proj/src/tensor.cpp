#include "bcp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bcp {

namespace {

thread_local Tape* g_active_tape = nullptr;

void check_finite(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

std::vector<double>& grad_buf(const TensorDataPtr& t) {
    if (t->grad.empty()) t->grad.assign(t->values.size(), 0.0);
    return t->grad;
}

}  // namespace

std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values,
               bool requires_grad) {
    if (numel(shape) != values.size()) {
        throw std::invalid_argument("tensor shape " + shape_str(shape) +
                                    " does not match value count " +
                                    std::to_string(values.size()));
    }
    data_ = std::make_shared<TensorData>();
    data_->shape = std::move(shape);
    data_->values = std::move(values);
    data_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    std::vector<double> v(numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value, bool requires_grad) {
    std::vector<double> v(numel(shape), value);
    return Tensor(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor({1}, {value}, requires_grad);
}

double Tensor::item() const {
    if (size() != 1) {
        throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
    }
    return data_->values[0];
}

const std::vector<double>& Tensor::grad() const {
    if (data_->grad.empty()) {
        throw std::logic_error("gradient not populated; run backward first");
    }
    return data_->grad;
}

Tape::Tape() {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() { g_active_tape = prev_; }

Tape* Tape::active() { return g_active_tape; }

void Tape::record(std::vector<TensorDataPtr> inputs, TensorDataPtr output,
                  std::function<void()> backward) {
    Tape* t = g_active_tape;
    if (!t) return;
    bool any_grad = false;
    for (const auto& in : inputs) any_grad = any_grad || in->requires_grad;
    if (!any_grad) return;
    output->requires_grad = true;
    t->nodes_.push_back({std::move(inputs), std::move(output), std::move(backward)});
}

void backward(const Tensor& loss, Tape& tape) {
    if (loss.size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss, got " +
                                    shape_str(loss.shape()));
    }
    if (tape.consumed_) {
        throw std::logic_error("tape already walked; build a fresh tape for another backward");
    }
    tape.consumed_ = true;
    grad_buf(loss.data())[0] = 1.0;
    for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
        if (it->output->grad.empty()) continue;  // not on the path to the loss
        it->backward();
    }
}

// ---- broadcasting helpers -------------------------------------------------

namespace {

struct Broadcast {
    std::vector<std::size_t> out_shape;
    std::vector<std::size_t> a_stride;  // per out dim, 0 where broadcast
    std::vector<std::size_t> b_stride;
};

std::vector<std::size_t> row_major_strides(const std::vector<std::size_t>& shape) {
    std::vector<std::size_t> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i) {
        s[i] = s[i + 1] * shape[i + 1];
    }
    return s;
}

Broadcast make_broadcast(const std::vector<std::size_t>& a,
                         const std::vector<std::size_t>& b) {
    std::size_t rank = std::max(a.size(), b.size());
    std::vector<std::size_t> ea(rank, 1), eb(rank, 1);
    std::copy(a.begin(), a.end(), ea.begin() + (rank - a.size()));
    std::copy(b.begin(), b.end(), eb.begin() + (rank - b.size()));
    Broadcast bc;
    bc.out_shape.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        if (ea[i] == eb[i]) {
            bc.out_shape[i] = ea[i];
        } else if (ea[i] == 1 || eb[i] == 1) {
            bc.out_shape[i] = std::max(ea[i], eb[i]);
        } else {
            throw std::invalid_argument("shapes " + shape_str(a) + " and " +
                                        shape_str(b) + " are not broadcastable");
        }
    }
    auto sa = row_major_strides(ea), sb = row_major_strides(eb);
    bc.a_stride.resize(rank);
    bc.b_stride.resize(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        bc.a_stride[i] = (ea[i] == 1 && bc.out_shape[i] != 1) ? 0 : sa[i];
        bc.b_stride[i] = (eb[i] == 1 && bc.out_shape[i] != 1) ? 0 : sb[i];
    }
    return bc;
}

// Applies fn(out_index, a_index, b_index) over the broadcast iteration space.
template <typename Fn>
void for_broadcast(const Broadcast& bc, Fn&& fn) {
    std::size_t n = numel(bc.out_shape);
    std::size_t rank = bc.out_shape.size();
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t io = 0; io < n; ++io) {
        fn(io, ia, ib);
        for (int d = static_cast<int>(rank) - 1; d >= 0; --d) {
            ++idx[d];
            ia += bc.a_stride[d];
            ib += bc.b_stride[d];
            if (idx[d] < bc.out_shape[d]) break;
            ia -= bc.a_stride[d] * bc.out_shape[d];
            ib -= bc.b_stride[d] * bc.out_shape[d];
            idx[d] = 0;
        }
    }
}

Tensor binary_op(const Tensor& a, const Tensor& b, const char* name,
                 double (*fwd)(double, double),
                 void (*bwd)(double av, double bv, double go, double& ga, double& gb)) {
    Broadcast bc = make_broadcast(a.shape(), b.shape());
    std::vector<double> out(numel(bc.out_shape));
    const double* pa = a.values().data();
    const double* pb = b.values().data();
    for_broadcast(bc, [&](std::size_t io, std::size_t ia, std::size_t ib) {
        out[io] = fwd(pa[ia], pb[ib]);
    });
    check_finite(out, name);
    Tensor result(bc.out_shape, std::move(out));
    auto ad = a.data(), bd = b.data(), od = result.data();
    Tape::record({ad, bd}, od, [ad, bd, od, bc, bwd]() {
        const double* go = od->grad.data();
        const double* pa = ad->values.data();
        const double* pb = bd->values.data();
        double* ga = ad->requires_grad ? grad_buf(ad).data() : nullptr;
        double* gb = bd->requires_grad ? grad_buf(bd).data() : nullptr;
        for_broadcast(bc, [&](std::size_t io, std::size_t ia, std::size_t ib) {
            double da = 0.0, db = 0.0;
            bwd(pa[ia], pb[ib], go[io], da, db);
            if (ga) ga[ia] += da;
            if (gb) gb[ib] += db;
        });
    });
    return result;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& ga, double& gb) {
            ga = g;
            gb = g;
        });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& ga, double& gb) {
            ga = g;
            gb = -g;
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga = g * y;
            gb = g * x;
        });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return binary_op(
        a, b, "div", [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& ga, double& gb) {
            ga = g / y;
            gb = -g * x / (y * y);
        });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = x.values()[i] > 0.0 ? x.values()[i] : 0.0;
    }
    Tensor result(x.shape(), std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od]() {
        double* gx = grad_buf(xd).data();
        for (std::size_t i = 0; i < xd->values.size(); ++i) {
            if (xd->values[i] > 0.0) gx[i] += od->grad[i];
        }
    });
    return result;
}

Tensor neg_log_clamped(const Tensor& x, double floor) {
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = -std::log(std::max(x.values()[i], floor));
    }
    check_finite(out, "neg_log_clamped");
    Tensor result(x.shape(), std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, floor]() {
        double* gx = grad_buf(xd).data();
        for (std::size_t i = 0; i < xd->values.size(); ++i) {
            if (xd->values[i] > floor) gx[i] += od->grad[i] * (-1.0 / xd->values[i]);
        }
    });
    return result;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int padding) {
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is.size() != 4 || ks.size() != 4) {
        throw std::invalid_argument("conv2d expects 4-D input and kernel, got " +
                                    shape_str(is) + " and " + shape_str(ks));
    }
    if (is[1] != ks[1]) {
        throw std::invalid_argument("conv2d channel mismatch: input " + shape_str(is) +
                                    " vs kernel " + shape_str(ks));
    }
    if (ks[2] % 2 == 0 || ks[3] % 2 == 0) {
        throw std::invalid_argument("conv2d kernel extents must be odd, got " +
                                    shape_str(ks));
    }
    if (bias.shape() != std::vector<std::size_t>{ks[0]}) {
        throw std::invalid_argument("conv2d bias shape " + shape_str(bias.shape()) +
                                    " must be [" + std::to_string(ks[0]) + "]");
    }
    if (stride < 1 || padding < 0) {
        throw std::invalid_argument("conv2d requires stride >= 1 and padding >= 0");
    }
    const std::size_t B = is[0], Cin = is[1], H = is[2], W = is[3];
    const std::size_t Cout = ks[0], kh = ks[2], kw = ks[3];
    const long num_h = static_cast<long>(H) + 2 * padding - static_cast<long>(kh);
    const long num_w = static_cast<long>(W) + 2 * padding - static_cast<long>(kw);
    if (num_h < 0 || num_w < 0 || num_h % stride != 0 || num_w % stride != 0) {
        throw std::invalid_argument("conv2d output extent not integral for input " +
                                    shape_str(is) + ", kernel " + shape_str(ks));
    }
    const std::size_t Ho = static_cast<std::size_t>(num_h / stride) + 1;
    const std::size_t Wo = static_cast<std::size_t>(num_w / stride) + 1;

    std::vector<double> out(B * Cout * Ho * Wo);
    const double* in = input.values().data();
    const double* k = kernel.values().data();
    const double* bp = bias.values().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t co = 0; co < Cout; ++co) {
            double* op = out.data() + ((b * Cout + co) * Ho) * Wo;
            for (std::size_t oy = 0; oy < Ho; ++oy) {
                for (std::size_t ox = 0; ox < Wo; ++ox) op[oy * Wo + ox] = bp[co];
            }
            for (std::size_t ci = 0; ci < Cin; ++ci) {
                const double* ip = in + ((b * Cin + ci) * H) * W;
                const double* kp = k + ((co * Cin + ci) * kh) * kw;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const long y0 = static_cast<long>(oy) * stride - padding;
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const long y = y0 + static_cast<long>(ky);
                        if (y < 0 || y >= static_cast<long>(H)) continue;
                        const double* irow = ip + y * W;
                        const double* krow = kp + ky * kw;
                        double* orow = op + oy * Wo;
                        for (std::size_t ox = 0; ox < Wo; ++ox) {
                            const long x0 = static_cast<long>(ox) * stride - padding;
                            double acc = 0.0;
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long x = x0 + static_cast<long>(kx);
                                if (x < 0 || x >= static_cast<long>(W)) continue;
                                acc += irow[x] * krow[kx];
                            }
                            orow[ox] += acc;
                        }
                    }
                }
            }
        }
    }
    check_finite(out, "conv2d");
    Tensor result({B, Cout, Ho, Wo}, std::move(out));
    auto id = input.data(), kd = kernel.data(), bd = bias.data(), od = result.data();
    Tape::record({id, kd, bd}, od, [=]() {
        const double* go = od->grad.data();
        const double* in = id->values.data();
        const double* k = kd->values.data();
        double* gi = id->requires_grad ? grad_buf(id).data() : nullptr;
        double* gk = kd->requires_grad ? grad_buf(kd).data() : nullptr;
        double* gb = bd->requires_grad ? grad_buf(bd).data() : nullptr;
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t co = 0; co < Cout; ++co) {
                const double* gop = go + ((b * Cout + co) * Ho) * Wo;
                if (gb) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < Ho * Wo; ++i) acc += gop[i];
                    gb[co] += acc;
                }
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                    const double* ip = in + ((b * Cin + ci) * H) * W;
                    const double* kp = k + ((co * Cin + ci) * kh) * kw;
                    double* gip = gi ? gi + ((b * Cin + ci) * H) * W : nullptr;
                    double* gkp = gk ? gk + ((co * Cin + ci) * kh) * kw : nullptr;
                    for (std::size_t oy = 0; oy < Ho; ++oy) {
                        const long y0 = static_cast<long>(oy) * stride - padding;
                        for (std::size_t ky = 0; ky < kh; ++ky) {
                            const long y = y0 + static_cast<long>(ky);
                            if (y < 0 || y >= static_cast<long>(H)) continue;
                            for (std::size_t ox = 0; ox < Wo; ++ox) {
                                const long x0 = static_cast<long>(ox) * stride - padding;
                                const double g = gop[oy * Wo + ox];
                                for (std::size_t kx = 0; kx < kw; ++kx) {
                                    const long x = x0 + static_cast<long>(kx);
                                    if (x < 0 || x >= static_cast<long>(W)) continue;
                                    if (gip) gip[y * W + x] += g * kp[ky * kw + kx];
                                    if (gkp) gkp[ky * kw + kx] += g * ip[y * W + x];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return result;
}

Tensor maxpool2(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[2] % 2 != 0 || s[3] % 2 != 0) {
        throw std::invalid_argument("maxpool2 expects [B,C,H,W] with even H and W, got " +
                                    shape_str(s));
    }
    const std::size_t B = s[0], C = s[1], H = s[2], W = s[3];
    const std::size_t Ho = H / 2, Wo = W / 2;
    std::vector<double> out(B * C * Ho * Wo);
    std::vector<std::size_t> argmax(out.size());
    const double* in = x.values().data();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* ip = in + bc * H * W;
        for (std::size_t oy = 0; oy < Ho; ++oy) {
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                std::size_t best = (2 * oy) * W + 2 * ox;
                const std::size_t cand[3] = {best + 1, best + W, best + W + 1};
                for (std::size_t c : cand) {
                    if (ip[c] > ip[best]) best = c;
                }
                out[bc * Ho * Wo + oy * Wo + ox] = ip[best];
                argmax[bc * Ho * Wo + oy * Wo + ox] = bc * H * W + best;
            }
        }
    }
    Tensor result({B, C, Ho, Wo}, std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, argmax = std::move(argmax)]() {
        double* gx = grad_buf(xd).data();
        for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += od->grad[i];
    });
    return result;
}

Tensor nearest_upsample2x(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4) {
        throw std::invalid_argument("nearest_upsample2x expects [B,C,H,W], got " +
                                    shape_str(s));
    }
    const std::size_t B = s[0], C = s[1], H = s[2], W = s[3];
    std::vector<double> out(B * C * 4 * H * W);
    const double* in = x.values().data();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* ip = in + bc * H * W;
        double* op = out.data() + bc * 4 * H * W;
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x2 = 0; x2 < W; ++x2) {
                const double v = ip[y * W + x2];
                op[(2 * y) * 2 * W + 2 * x2] = v;
                op[(2 * y) * 2 * W + 2 * x2 + 1] = v;
                op[(2 * y + 1) * 2 * W + 2 * x2] = v;
                op[(2 * y + 1) * 2 * W + 2 * x2 + 1] = v;
            }
        }
    }
    Tensor result({B, C, 2 * H, 2 * W}, std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, B, C, H, W]() {
        double* gx = grad_buf(xd).data();
        const double* go = od->grad.data();
        for (std::size_t bc = 0; bc < B * C; ++bc) {
            const double* gp = go + bc * 4 * H * W;
            double* gxp = gx + bc * H * W;
            for (std::size_t y = 0; y < H; ++y) {
                for (std::size_t x2 = 0; x2 < W; ++x2) {
                    gxp[y * W + x2] += gp[(2 * y) * 2 * W + 2 * x2] +
                                       gp[(2 * y) * 2 * W + 2 * x2 + 1] +
                                       gp[(2 * y + 1) * 2 * W + 2 * x2] +
                                       gp[(2 * y + 1) * 2 * W + 2 * x2 + 1];
                }
            }
        }
    });
    return result;
}

Tensor channel_concat(const Tensor& a, const Tensor& b) {
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    if (sa.size() != 4 || sb.size() != 4 || sa[0] != sb[0] || sa[2] != sb[2] ||
        sa[3] != sb[3]) {
        throw std::invalid_argument("channel_concat shape mismatch: " + shape_str(sa) +
                                    " vs " + shape_str(sb));
    }
    const std::size_t B = sa[0], Ca = sa[1], Cb = sb[1], HW = sa[2] * sa[3];
    std::vector<double> out(B * (Ca + Cb) * HW);
    for (std::size_t bi = 0; bi < B; ++bi) {
        std::copy_n(a.values().data() + bi * Ca * HW, Ca * HW,
                    out.data() + bi * (Ca + Cb) * HW);
        std::copy_n(b.values().data() + bi * Cb * HW, Cb * HW,
                    out.data() + bi * (Ca + Cb) * HW + Ca * HW);
    }
    Tensor result({B, Ca + Cb, sa[2], sa[3]}, std::move(out));
    auto ad = a.data(), bd = b.data(), od = result.data();
    Tape::record({ad, bd}, od, [ad, bd, od, B, Ca, Cb, HW]() {
        const double* go = od->grad.data();
        double* ga = ad->requires_grad ? grad_buf(ad).data() : nullptr;
        double* gb = bd->requires_grad ? grad_buf(bd).data() : nullptr;
        for (std::size_t bi = 0; bi < B; ++bi) {
            const double* gp = go + bi * (Ca + Cb) * HW;
            if (ga) {
                for (std::size_t i = 0; i < Ca * HW; ++i) ga[bi * Ca * HW + i] += gp[i];
            }
            if (gb) {
                for (std::size_t i = 0; i < Cb * HW; ++i) {
                    gb[bi * Cb * HW + i] += gp[Ca * HW + i];
                }
            }
        }
    });
    return result;
}

Tensor softmax_channels(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() < 2 || s[1] < 2) {
        throw std::invalid_argument("softmax_channels expects [B,K,...] with K >= 2, got " +
                                    shape_str(s));
    }
    const std::size_t B = s[0], K = s[1];
    std::size_t spatial = 1;
    for (std::size_t i = 2; i < s.size(); ++i) spatial *= s[i];
    std::vector<double> out(x.size());
    const double* in = x.values().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t v = 0; v < spatial; ++v) {
            const std::size_t base = b * K * spatial + v;
            double m = in[base];
            for (std::size_t k = 1; k < K; ++k) m = std::max(m, in[base + k * spatial]);
            double z = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                out[base + k * spatial] = std::exp(in[base + k * spatial] - m);
                z += out[base + k * spatial];
            }
            for (std::size_t k = 0; k < K; ++k) out[base + k * spatial] /= z;
        }
    }
    Tensor result(s, std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, B, K, spatial]() {
        double* gx = grad_buf(xd).data();
        const double* q = od->values.data();
        const double* go = od->grad.data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t v = 0; v < spatial; ++v) {
                const std::size_t base = b * K * spatial + v;
                double dot = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    dot += go[base + k * spatial] * q[base + k * spatial];
                }
                for (std::size_t k = 0; k < K; ++k) {
                    gx[base + k * spatial] +=
                        q[base + k * spatial] * (go[base + k * spatial] - dot);
                }
            }
        }
    });
    return result;
}

namespace {

Tensor reduce_impl(const Tensor& x, bool mean) {
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const double scale = mean ? 1.0 / static_cast<double>(x.size()) : 1.0;
    Tensor result = Tensor::scalar(acc * scale);
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, scale]() {
        double* gx = grad_buf(xd).data();
        const double g = od->grad[0] * scale;
        for (std::size_t i = 0; i < xd->values.size(); ++i) gx[i] += g;
    });
    return result;
}

}  // namespace

Tensor reduce_mean(const Tensor& x) { return reduce_impl(x, true); }
Tensor reduce_sum(const Tensor& x) { return reduce_impl(x, false); }

Tensor sum_channels(const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() < 2) {
        throw std::invalid_argument("sum_channels expects [B,K,...], got " + shape_str(s));
    }
    const std::size_t B = s[0], K = s[1];
    std::size_t spatial = 1;
    for (std::size_t i = 2; i < s.size(); ++i) spatial *= s[i];
    std::vector<double> out(B * spatial, 0.0);
    const double* in = x.values().data();
    for (std::size_t b = 0; b < B; ++b) {
        for (std::size_t k = 0; k < K; ++k) {
            for (std::size_t v = 0; v < spatial; ++v) {
                out[b * spatial + v] += in[(b * K + k) * spatial + v];
            }
        }
    }
    std::vector<std::size_t> os = s;
    os[1] = 1;
    Tensor result(os, std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, B, K, spatial]() {
        double* gx = grad_buf(xd).data();
        const double* go = od->grad.data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
                for (std::size_t v = 0; v < spatial; ++v) {
                    gx[(b * K + k) * spatial + v] += go[b * spatial + v];
                }
            }
        }
    });
    return result;
}

Tensor slice_channel(const Tensor& x, std::size_t c) {
    const auto& s = x.shape();
    if (s.size() < 2 || c >= s[1]) {
        throw std::invalid_argument("slice_channel: channel " + std::to_string(c) +
                                    " out of range for " + shape_str(s));
    }
    const std::size_t B = s[0], K = s[1];
    std::size_t spatial = 1;
    for (std::size_t i = 2; i < s.size(); ++i) spatial *= s[i];
    std::vector<double> out(B * spatial);
    const double* in = x.values().data();
    for (std::size_t b = 0; b < B; ++b) {
        std::copy_n(in + (b * K + c) * spatial, spatial, out.data() + b * spatial);
    }
    std::vector<std::size_t> os = s;
    os[1] = 1;
    Tensor result(os, std::move(out));
    auto xd = x.data(), od = result.data();
    Tape::record({xd}, od, [xd, od, B, K, c, spatial]() {
        double* gx = grad_buf(xd).data();
        const double* go = od->grad.data();
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t v = 0; v < spatial; ++v) {
                gx[(b * K + c) * spatial + v] += go[b * spatial + v];
            }
        }
    });
    return result;
}

}  // namespace bcp
