#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bcp/tensor.hpp"

namespace bcp {

struct NetConfig {
    int in_channels = 1;
    int num_classes = 3;
    int base_width = 8;
    int depth = 3;  // encoder levels; depth-1 downsamplings
    std::uint64_t seed = 0;
};

/// Flat ordered collection of named parameter tensors.
class ModelParams {
public:
    void add(std::string name, Tensor t);
    const Tensor& at(const std::string& name) const;
    Tensor& at(const std::string& name);
    bool has(const std::string& name) const;
    std::size_t size() const { return entries_.size(); }

    std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
    const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

    /// Deep copy; `requires_grad` set on every copied tensor.
    ModelParams clone(bool requires_grad) const;

private:
    std::vector<std::pair<std::string, Tensor>> entries_;
};

struct OptimConfig {
    double lr0 = 0.01;
    double decay_factor = 0.9;
    int decay_interval = 2500;
    double momentum = 0.9;
};

struct EmaConfig {
    double lambda = 0.99;
};

/// Momentum buffers, one per parameter, laid out like the params.
using Velocity = std::map<std::string, std::vector<double>>;

/// Kaiming-style fan-in uniform init, biases zero; deterministic in seed.
ModelParams init_params(const NetConfig& cfg);

/// U-Net-style forward: encoder convs with 2x pooling, decoder with
/// nearest upsampling and skip concats, 1x1 head. Spatial dims must be
/// divisible by 2^(depth-1). Records on the active tape if any.
Tensor forward(const ModelParams& params, const NetConfig& cfg, const Tensor& x);

/// v <- momentum*v + g; theta <- theta - lr*v. Returns fresh tensors;
/// grads are read from each parameter's populated grad buffer.
void sgd_step(ModelParams& params, Velocity& velocity, double lr, double momentum);

double lr_at(int iter, const OptimConfig& cfg);

/// theta_t <- lambda*theta_t + (1-lambda)*theta_s, elementwise (EMA).
void ema_update(ModelParams& teacher, const ModelParams& student, const EmaConfig& cfg);

// Checkpoint file: "BCPC" magic, u32 version, NetConfig, u64 iteration,
// then named parameter blobs as little-endian f32. Written atomically.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const NetConfig& cfg, std::uint64_t iteration);

struct Checkpoint {
    NetConfig cfg;
    std::uint64_t iteration = 0;
    ModelParams params;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace bcp
