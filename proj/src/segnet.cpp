#include "bcp/segnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace bcp {

void ModelParams::add(std::string name, Tensor t) {
    if (has(name)) {
        throw std::invalid_argument("duplicate parameter name: " + name);
    }
    entries_.emplace_back(std::move(name), std::move(t));
}

const Tensor& ModelParams::at(const std::string& name) const {
    for (const auto& [n, t] : entries_) {
        if (n == name) return t;
    }
    throw std::out_of_range("no parameter named " + name);
}

Tensor& ModelParams::at(const std::string& name) {
    for (auto& [n, t] : entries_) {
        if (n == name) return t;
    }
    throw std::out_of_range("no parameter named " + name);
}

bool ModelParams::has(const std::string& name) const {
    for (const auto& [n, t] : entries_) {
        if (n == name) return true;
    }
    return false;
}

ModelParams ModelParams::clone(bool requires_grad) const {
    ModelParams out;
    for (const auto& [n, t] : entries_) {
        out.add(n, Tensor(t.shape(), t.values(), requires_grad));
    }
    return out;
}

namespace {

struct LayerDims {
    std::size_t cin, cout, k;  // k x k kernel
};

// Channel plan for the encoder/decoder/head conv stack.
std::vector<std::pair<std::string, LayerDims>> layer_plan(const NetConfig& cfg) {
    if (cfg.depth < 1 || cfg.base_width < 1 || cfg.num_classes < 2) {
        throw std::invalid_argument("NetConfig requires depth >= 1, base_width >= 1, K >= 2");
    }
    std::vector<std::pair<std::string, LayerDims>> plan;
    const std::size_t w = static_cast<std::size_t>(cfg.base_width);
    std::size_t cin = static_cast<std::size_t>(cfg.in_channels);
    for (int l = 0; l < cfg.depth; ++l) {
        const std::size_t cout = w << l;
        plan.push_back({"enc" + std::to_string(l), {cin, cout, 3}});
        cin = cout;
    }
    for (int l = cfg.depth - 2; l >= 0; --l) {
        const std::size_t skip = w << l;
        plan.push_back({"dec" + std::to_string(l), {cin + skip, skip, 3}});
        cin = skip;
    }
    plan.push_back({"head", {cin, static_cast<std::size_t>(cfg.num_classes), 1}});
    return plan;
}

}  // namespace

ModelParams init_params(const NetConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    ModelParams params;
    for (const auto& [name, d] : layer_plan(cfg)) {
        const double bound = std::sqrt(6.0 / static_cast<double>(d.cin * d.k * d.k));
        std::uniform_real_distribution<double> dist(-bound, bound);
        std::vector<double> w(d.cout * d.cin * d.k * d.k);
        for (double& v : w) v = dist(rng);
        params.add(name + ".w", Tensor({d.cout, d.cin, d.k, d.k}, std::move(w)));
        params.add(name + ".b", Tensor::zeros({d.cout}));
    }
    return params;
}

Tensor forward(const ModelParams& params, const NetConfig& cfg, const Tensor& x) {
    const auto& s = x.shape();
    if (s.size() != 4) {
        throw std::invalid_argument("forward expects [B,Cin,H,W], got " + shape_str(s));
    }
    const std::size_t divisor = std::size_t{1} << (cfg.depth - 1);
    if (s[2] % divisor != 0 || s[3] % divisor != 0) {
        throw std::invalid_argument("spatial dims of " + shape_str(s) +
                                    " must be divisible by " + std::to_string(divisor));
    }
    std::vector<Tensor> skips;
    Tensor h = x;
    for (int l = 0; l < cfg.depth; ++l) {
        const std::string n = "enc" + std::to_string(l);
        if (l > 0) h = maxpool2(h);
        h = relu(conv2d(h, params.at(n + ".w"), params.at(n + ".b"), 1, 1));
        if (l < cfg.depth - 1) skips.push_back(h);
    }
    for (int l = cfg.depth - 2; l >= 0; --l) {
        const std::string n = "dec" + std::to_string(l);
        h = channel_concat(nearest_upsample2x(h), skips[static_cast<std::size_t>(l)]);
        h = relu(conv2d(h, params.at(n + ".w"), params.at(n + ".b"), 1, 1));
    }
    return conv2d(h, params.at("head.w"), params.at("head.b"), 1, 0);
}

void sgd_step(ModelParams& params, Velocity& velocity, double lr, double momentum) {
    for (auto& [name, t] : params.entries()) {
        if (!t.has_grad()) {
            throw std::invalid_argument("sgd_step: missing gradient for parameter " + name);
        }
        auto& v = velocity[name];
        if (v.empty()) v.assign(t.size(), 0.0);
        const auto& g = t.grad();
        std::vector<double> nv(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            nv[i] = momentum * v[i] + g[i];
            if (!std::isfinite(nv[i])) {
                throw NumericError("sgd_step: non-finite update for " + name);
            }
        }
        std::vector<double> nw(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) nw[i] = t.values()[i] - lr * nv[i];
        v = std::move(nv);
        t = Tensor(t.shape(), std::move(nw), true);
    }
}

double lr_at(int iter, const OptimConfig& cfg) {
    if (iter < 0) throw std::invalid_argument("lr_at: iter must be >= 0");
    if (cfg.lr0 <= 0 || cfg.decay_factor <= 0 || cfg.decay_factor > 1 ||
        cfg.decay_interval < 1) {
        throw std::invalid_argument("invalid OptimConfig");
    }
    return cfg.lr0 * std::pow(cfg.decay_factor, iter / cfg.decay_interval);
}

void ema_update(ModelParams& teacher, const ModelParams& student, const EmaConfig& cfg) {
    if (cfg.lambda < 0.0 || cfg.lambda > 1.0) {
        throw std::invalid_argument("ema lambda must lie in [0,1]");
    }
    if (teacher.size() != student.size()) {
        throw std::invalid_argument("ema_update: parameter sets differ in size");
    }
    for (auto& [name, t] : teacher.entries()) {
        const Tensor& s = student.at(name);
        if (t.shape() != s.shape()) {
            throw std::invalid_argument("ema_update: shape mismatch for " + name + ": " +
                                        shape_str(t.shape()) + " vs " +
                                        shape_str(s.shape()));
        }
        std::vector<double> nv(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            nv[i] = cfg.lambda * t.values()[i] + (1.0 - cfg.lambda) * s.values()[i];
        }
        t = Tensor(t.shape(), std::move(nv), false);
    }
}

// ---- checkpoint I/O --------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'C', 'P', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("checkpoint truncated");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const NetConfig& cfg, std::uint64_t iteration) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
        os.write(kMagic, 4);
        write_pod(os, kVersion);
        write_pod(os, static_cast<std::int32_t>(cfg.in_channels));
        write_pod(os, static_cast<std::int32_t>(cfg.num_classes));
        write_pod(os, static_cast<std::int32_t>(cfg.base_width));
        write_pod(os, static_cast<std::int32_t>(cfg.depth));
        write_pod(os, cfg.seed);
        write_pod(os, iteration);
        write_pod(os, static_cast<std::uint32_t>(params.size()));
        for (const auto& [name, t] : params.entries()) {
            write_pod(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod(os, static_cast<std::uint32_t>(t.shape().size()));
            for (std::size_t d : t.shape()) write_pod(os, static_cast<std::uint32_t>(d));
            for (double v : t.values()) write_pod(os, static_cast<float>(v));
        }
        if (!os) throw std::runtime_error("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error(path + " is not a checkpoint file");
    }
    const auto version = read_pod<std::uint32_t>(is);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    ck.cfg.in_channels = read_pod<std::int32_t>(is);
    ck.cfg.num_classes = read_pod<std::int32_t>(is);
    ck.cfg.base_width = read_pod<std::int32_t>(is);
    ck.cfg.depth = read_pod<std::int32_t>(is);
    ck.cfg.seed = read_pod<std::uint64_t>(is);
    ck.iteration = read_pod<std::uint64_t>(is);
    const auto n = read_pod<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto len = read_pod<std::uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const auto ndims = read_pod<std::uint32_t>(is);
        std::vector<std::size_t> shape(ndims);
        for (auto& d : shape) d = read_pod<std::uint32_t>(is);
        std::vector<double> values(numel(shape));
        for (double& v : values) v = static_cast<double>(read_pod<float>(is));
        ck.params.add(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    return ck;
}

}  // namespace bcp
