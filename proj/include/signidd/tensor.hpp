#pragma once

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "signidd/skeleton.hpp"

namespace signidd {

// One node of the recorded computation graph. Values are always float64;
// grad is allocated lazily when backward first touches the node.
struct TensorNode {
    std::vector<int> shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

// Shared handle to a graph node. Copies alias the same storage, which is how
// parameters stay live across training steps while intermediate nodes are
// freed when the last handle to a step's loss drops.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor from(std::vector<int> shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int size() const { return static_cast<int>(node_->values.size()); }
    // 2-D view helpers: cols = last axis, rows = everything before it.
    int cols() const { return node_->shape.back(); }
    int rows() const { return size() / cols(); }

    std::span<const double> values() const { return node_->values; }
    double* data() { return node_->values.data(); }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.assign(node_->values.size(), 0.0); }

    const std::shared_ptr<TensorNode>& node() const { return node_; }

private:
    std::shared_ptr<TensorNode> node_;
};

// --- ops ---------------------------------------------------------------
// Every op validates shapes, computes values eagerly, and records a backward
// closure when any input requires grad.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
// a (r x c) + row vector v (c), broadcast over rows.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
// Numerically stabilized softmax over the last axis; rows sum to 1.
Tensor softmax_rows(const Tensor& x);
// Per-row zero-mean/unit-variance over the last axis (eps = 1e-5), then
// affine with gain/shift of that width.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift);
// Smooth ramp x * sigmoid(x).
Tensor silu(const Tensor& x);
// Gather rows of table (V x d) at the given indices.
Tensor embedding_rows(const Tensor& table, const std::vector<int>& indices);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, int col_begin, int col_end);
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor abs_elem(const Tensor& a);

// Differentiable bone directions: coords is S x (J*3); returns S x (B*3)
// unit parent->child directions, bones ordered by child index. Bones shorter
// than kDegenerateBoneLength yield zeros with zero gradient.
Tensor bone_directions(const Tensor& coords, const SkeletonTopology& topo);

// Reverse-mode sweep from a scalar loss. Accumulates into .grad of every
// reachable node that requires grad.
void backward(const Tensor& loss);

// Same sweep, but every accumulation lands in the given map (keyed by node)
// instead of the nodes' own grad arrays. Sweeps over disjoint graphs that
// share only leaf parameters can then run on separate threads, one sink
// each, and be merged in a fixed order.
using GradMap = std::unordered_map<const TensorNode*, std::vector<double>>;
void backward_into(const Tensor& loss, GradMap& sink);

void zero_grad(std::span<const Tensor> params);

// --- finite-difference verification -------------------------------------

struct GradCheckOptions {
    double step = 1e-5;
    // < 0 checks every coordinate; otherwise per-parameter sample size.
    int max_coords_per_param = -1;
    uint64_t sample_seed = 0;
};

// Rebuilds f() around perturbed parameter values and compares its reverse-
// mode gradient against central differences. Returns the max relative error
// |ad - fd| / max(|ad|, |fd|, 1e-2). Throws if f is non-finite.
double check_gradients(const std::function<Tensor()>& f, std::span<const Tensor> params,
                       const GradCheckOptions& opts = {});

}  // namespace signidd
