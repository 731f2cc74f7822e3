#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace bcp {

// Thrown when a forward or backward pass produces non-finite values.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TensorData {
    std::vector<std::size_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated lazily during backward
    bool requires_grad = false;
};

using TensorDataPtr = std::shared_ptr<TensorData>;

/// Dense N-D double tensor with value semantics over a shared buffer.
/// Buffers are never mutated after construction; every op returns a
/// fresh tensor.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<std::size_t> shape, std::vector<double> values,
           bool requires_grad = false);

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor full(std::vector<std::size_t> shape, double value,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return data_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return data_->shape; }
    std::size_t size() const { return data_->values.size(); }
    const std::vector<double>& values() const { return data_->values; }
    double item() const;

    bool requires_grad() const { return data_->requires_grad; }
    bool has_grad() const { return !data_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad() { data_->grad.clear(); }

    const TensorDataPtr& data() const { return data_; }

private:
    TensorDataPtr data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);
std::size_t numel(const std::vector<std::size_t>& shape);

/// Ordered record of differentiable ops executed while the tape was
/// active on the current thread. Backward replays it in reverse.
class Tape {
public:
    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    struct Node {
        std::vector<TensorDataPtr> inputs;
        TensorDataPtr output;
        std::function<void()> backward;
    };

    static Tape* active();
    static void record(std::vector<TensorDataPtr> inputs, TensorDataPtr output,
                       std::function<void()> backward);

    friend void backward(const Tensor& loss, Tape& tape);

private:
    std::vector<Node> nodes_;
    Tape* prev_ = nullptr;
    bool consumed_ = false;
};

/// Populates grad on every grad-enabled ancestor of `loss`. Gradients
/// accumulate additively across fan-out. A tape can be walked once.
void backward(const Tensor& loss, Tape& tape);

// Elementwise ops. add/sub/mul/div broadcast numpy-style (a dim may be 1
// on either side); the common case is a [B,1,...] weight map against
// [B,K,...] activations.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);

/// -log(max(x, floor)) elementwise; gradient is zero where clamped.
Tensor neg_log_clamped(const Tensor& x, double floor = 1e-12);

/// Cross-correlation with square-bracket semantics: input [B,Cin,H,W],
/// kernel [Cout,Cin,kh,kw], bias [Cout]. kh, kw must be odd.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride = 1, int padding = 0);

Tensor maxpool2(const Tensor& x);            // 2x2, stride 2, even dims
Tensor nearest_upsample2x(const Tensor& x);  // each voxel -> 2x2 block
Tensor channel_concat(const Tensor& a, const Tensor& b);

/// Channel softmax over dim 1 of [B,K,...], max-subtracted for stability.
Tensor softmax_channels(const Tensor& x);

Tensor reduce_mean(const Tensor& x);  // -> scalar
Tensor reduce_sum(const Tensor& x);   // -> scalar
Tensor sum_channels(const Tensor& x);         // [B,K,...] -> [B,1,...]
Tensor slice_channel(const Tensor& x, std::size_t c);  // -> [B,1,...]

}  // namespace bcp
