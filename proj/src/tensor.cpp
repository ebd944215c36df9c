#include "signidd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "signidd/disentangle.hpp"
#include "signidd/rng.hpp"

namespace signidd {

namespace {

// When set, backward sweeps accumulate into this per-thread map instead of
// the nodes' own grad arrays. Parallel batch evaluation gives each thread
// its own sink, so shared parameter nodes are never written concurrently.
thread_local GradMap* t_grad_sink = nullptr;

std::vector<double>& grad_buffer(TensorNode& node) {
    if (t_grad_sink) {
        auto& buf = (*t_grad_sink)[&node];
        if (buf.size() != node.values.size()) buf.assign(node.values.size(), 0.0);
        return buf;
    }
    node.ensure_grad();
    return node.grad;
}

int shape_product(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
        n *= d;
    }
    return n;
}

std::shared_ptr<TensorNode> make_node(std::vector<int> shape, std::vector<double> values) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    if (static_cast<int>(node->values.size()) != shape_product(node->shape))
        throw std::invalid_argument("tensor: value count does not match shape");
    return node;
}

// c (m x n) += a (m x k) * b (k x n)
void mm_acc_nn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * k;
        double* crow = c + static_cast<size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double s = arow[l];
            const double* brow = b + static_cast<size_t>(l) * n;
            for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

// c (m x k) += a (m x n) * b (k x n)^T
void mm_acc_nt(const double* a, const double* b, double* c, int m, int n, int k) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<size_t>(i) * n;
        double* crow = c + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double* brow = b + static_cast<size_t>(j) * n;
            double acc = 0.0;
            for (int l = 0; l < n; ++l) acc += arow[l] * brow[l];
            crow[j] += acc;
        }
    }
}

// c (k x n) += a (m x k)^T * b (m x n)
void mm_acc_tn(const double* a, const double* b, double* c, int m, int k, int n) {
    for (int l = 0; l < m; ++l) {
        const double* arow = a + static_cast<size_t>(l) * k;
        const double* brow = b + static_cast<size_t>(l) * n;
        for (int i = 0; i < k; ++i) {
            const double s = arow[i];
            double* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += s * brow[j];
        }
    }
}

bool track(const Tensor& a) { return a.node()->requires_grad; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const int n = shape_product(shape);
    auto node = make_node(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    auto node = make_node(std::move(shape), std::move(values));
    node->requires_grad = requires_grad;
    return Tensor(node);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return node_->values[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2) throw std::invalid_argument("matmul: rank-2 tensors required");
    const int m = a.shape()[0], k = a.shape()[1], k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw std::invalid_argument("matmul: inner dimensions disagree (" + std::to_string(k) + " vs " +
                                    std::to_string(k2) + ")");
    auto node = make_node({m, n}, std::vector<double>(static_cast<size_t>(m) * n, 0.0));
    mm_acc_nn(a.values().data(), b.values().data(), node->values.data(), m, k, n);
    if (track(a) || track(b)) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        node->backward_fn = [m, k, n](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) mm_acc_nt(g.data(), pb.values.data(), grad_buffer(pa).data(), m, n, k);
            if (pb.requires_grad) mm_acc_tn(pa.values.data(), g.data(), grad_buffer(pb).data(), m, k, n);
        };
    }
    return Tensor(node);
}

Tensor transpose(const Tensor& a) {
    if (a.shape().size() != 2) throw std::invalid_argument("transpose: rank-2 tensor required");
    const int m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) v[static_cast<size_t>(j) * m + i] = a.values()[static_cast<size_t>(i) * n + j];
    auto node = make_node({n, m}, std::move(v));
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [m, n](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (int j = 0; j < n; ++j)
                for (int i = 0; i < m; ++i) pg[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(j) * m + i];
        };
    }
    return Tensor(node);
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] += b.values()[i];
    auto node = make_node(a.shape(), std::move(v));
    if (track(a) || track(b)) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            for (auto& p : self.parents) {
                if (!p->requires_grad) continue;
                auto& pg = grad_buffer(*p);
                for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
            }
        };
    }
    return Tensor(node);
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] -= b.values()[i];
    auto node = make_node(a.shape(), std::move(v));
    if (track(a) || track(b)) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto& pg = grad_buffer(pa);
                for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
            }
            if (pb.requires_grad) {
                auto& pg = grad_buffer(pb);
                for (size_t i = 0; i < g.size(); ++i) pg[i] -= g[i];
            }
        };
    }
    return Tensor(node);
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> v(a.values().begin(), a.values().end());
    for (size_t i = 0; i < v.size(); ++i) v[i] *= b.values()[i];
    auto node = make_node(a.shape(), std::move(v));
    if (track(a) || track(b)) {
        node->requires_grad = true;
        node->parents = {a.node(), b.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pa = *self.parents[0];
            auto& pb = *self.parents[1];
            if (pa.requires_grad) {
                auto& pg = grad_buffer(pa);
                for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * pb.values[i];
            }
            if (pb.requires_grad) {
                auto& pg = grad_buffer(pb);
                for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i] * pa.values[i];
            }
        };
    }
    return Tensor(node);
}

Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.values().begin(), a.values().end());
    for (double& x : v) x *= c;
    auto node = make_node(a.shape(), std::move(v));
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [c](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) pg[i] += c * g[i];
        };
    }
    return Tensor(node);
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    const int r = a.rows(), c = a.cols();
    if (v.size() != c) throw std::invalid_argument("add_rowvec: vector width mismatch");
    std::vector<double> out(a.values().begin(), a.values().end());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] += v.values()[static_cast<size_t>(j)];
    auto node = make_node(a.shape(), std::move(out));
    if (track(a) || track(v)) {
        node->requires_grad = true;
        node->parents = {a.node(), v.node()};
        node->backward_fn = [r, c](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pa = *self.parents[0];
            auto& pv = *self.parents[1];
            if (pa.requires_grad) {
                auto& pg = grad_buffer(pa);
                for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
            }
            if (pv.requires_grad) {
                auto& pg = grad_buffer(pv);
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) pg[static_cast<size_t>(j)] += g[static_cast<size_t>(i) * c + j];
            }
        };
    }
    return Tensor(node);
}

Tensor softmax_rows(const Tensor& x) {
    const int r = x.rows(), c = x.cols();
    std::vector<double> v(static_cast<size_t>(r) * c);
    for (int i = 0; i < r; ++i) {
        const double* row = x.values().data() + static_cast<size_t>(i) * c;
        double* out = v.data() + static_cast<size_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < c; ++j) {
            out[j] = std::exp(row[j] - mx);
            sum += out[j];
        }
        for (int j = 0; j < c; ++j) out[j] /= sum;
    }
    auto node = make_node(x.shape(), std::move(v));
    if (track(x)) {
        node->requires_grad = true;
        node->parents = {x.node()};
        node->backward_fn = [r, c](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (int i = 0; i < r; ++i) {
                const double* y = self.values.data() + static_cast<size_t>(i) * c;
                const double* gr = g.data() + static_cast<size_t>(i) * c;
                double dot = 0.0;
                for (int j = 0; j < c; ++j) dot += gr[j] * y[j];
                double* gx = pg.data() + static_cast<size_t>(i) * c;
                for (int j = 0; j < c; ++j) gx[j] += y[j] * (gr[j] - dot);
            }
        };
    }
    return Tensor(node);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift) {
    const int r = x.rows(), c = x.cols();
    if (gain.size() != c || shift.size() != c) throw std::invalid_argument("layer_norm: affine width mismatch");
    constexpr double kEps = 1e-5;
    std::vector<double> v(static_cast<size_t>(r) * c);
    auto xhat = std::make_shared<std::vector<double>>(static_cast<size_t>(r) * c);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const double* row = x.values().data() + static_cast<size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= c;
        const double is = 1.0 / std::sqrt(var + kEps);
        (*inv_std)[static_cast<size_t>(i)] = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (row[j] - mean) * is;
            (*xhat)[static_cast<size_t>(i) * c + j] = xh;
            v[static_cast<size_t>(i) * c + j] =
                xh * gain.values()[static_cast<size_t>(j)] + shift.values()[static_cast<size_t>(j)];
        }
    }
    auto node = make_node(x.shape(), std::move(v));
    if (track(x) || track(gain) || track(shift)) {
        node->requires_grad = true;
        node->parents = {x.node(), gain.node(), shift.node()};
        node->backward_fn = [r, c, xhat, inv_std](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& px = *self.parents[0];
            auto& pgain = *self.parents[1];
            auto& pshift = *self.parents[2];
            if (pgain.requires_grad) {
                auto& pg = grad_buffer(pgain);
                for (int i = 0; i < r; ++i) {
                    const double* gr = g.data() + static_cast<size_t>(i) * c;
                    const double* xh = xhat->data() + static_cast<size_t>(i) * c;
                    for (int j = 0; j < c; ++j) pg[static_cast<size_t>(j)] += gr[j] * xh[j];
                }
            }
            if (pshift.requires_grad) {
                auto& pg = grad_buffer(pshift);
                for (int i = 0; i < r; ++i) {
                    const double* gr = g.data() + static_cast<size_t>(i) * c;
                    for (int j = 0; j < c; ++j) pg[static_cast<size_t>(j)] += gr[j];
                }
            }
            if (px.requires_grad) {
                auto& pg = grad_buffer(px);
                for (int i = 0; i < r; ++i) {
                    const double* gr = g.data() + static_cast<size_t>(i) * c;
                    const double* xh = xhat->data() + static_cast<size_t>(i) * c;
                    // dx = (gg - mean(gg) - xhat * mean(gg * xhat)) * inv_std,
                    // with gg = gain * upstream grad.
                    double mean_gg = 0.0, mean_ggx = 0.0;
                    for (int j = 0; j < c; ++j) {
                        const double gg = gr[j] * pgain.values[static_cast<size_t>(j)];
                        mean_gg += gg;
                        mean_ggx += gg * xh[j];
                    }
                    mean_gg /= c;
                    mean_ggx /= c;
                    const double is = (*inv_std)[static_cast<size_t>(i)];
                    double* gx = pg.data() + static_cast<size_t>(i) * c;
                    for (int j = 0; j < c; ++j) {
                        const double gg = gr[j] * pgain.values[static_cast<size_t>(j)];
                        gx[j] += (gg - mean_gg - xh[j] * mean_ggx) * is;
                    }
                }
            }
        };
    }
    return Tensor(node);
}

Tensor silu(const Tensor& x) {
    std::vector<double> v(x.values().begin(), x.values().end());
    for (double& t : v) {
        const double s = 1.0 / (1.0 + std::exp(-t));
        t = t * s;
    }
    auto node = make_node(x.shape(), std::move(v));
    if (track(x)) {
        node->requires_grad = true;
        node->parents = {x.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& px = *self.parents[0];
            auto& pg = grad_buffer(px);
            for (size_t i = 0; i < g.size(); ++i) {
                const double t = px.values[i];
                const double s = 1.0 / (1.0 + std::exp(-t));
                pg[i] += g[i] * s * (1.0 + t * (1.0 - s));
            }
        };
    }
    return Tensor(node);
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& indices) {
    if (table.shape().size() != 2) throw std::invalid_argument("embedding_rows: table must be rank 2");
    const int v_count = table.shape()[0], d = table.shape()[1];
    const int n = static_cast<int>(indices.size());
    std::vector<double> v(static_cast<size_t>(n) * d);
    for (int i = 0; i < n; ++i) {
        const int idx = indices[static_cast<size_t>(i)];
        if (idx < 0 || idx >= v_count)
            throw std::out_of_range("embedding_rows: index " + std::to_string(idx) + " outside vocabulary of " +
                                    std::to_string(v_count));
        std::copy_n(table.values().data() + static_cast<size_t>(idx) * d, d, v.data() + static_cast<size_t>(i) * d);
    }
    auto node = make_node({n, d}, std::move(v));
    if (track(table)) {
        node->requires_grad = true;
        node->parents = {table.node()};
        auto idx_copy = indices;
        node->backward_fn = [d, idx_copy](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (size_t i = 0; i < idx_copy.size(); ++i) {
                double* dst = pg.data() + static_cast<size_t>(idx_copy[i]) * d;
                const double* src = g.data() + i * d;
                for (int j = 0; j < d; ++j) dst[j] += src[j];
            }
        };
    }
    return Tensor(node);
}

Tensor concat_cols(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int r = parts[0].rows();
    int total = 0;
    bool any_grad = false;
    for (const Tensor& t : parts) {
        if (t.rows() != r) throw std::invalid_argument("concat_cols: row count mismatch");
        total += t.cols();
        any_grad = any_grad || track(t);
    }
    std::vector<double> v(static_cast<size_t>(r) * total);
    int off = 0;
    for (const Tensor& t : parts) {
        const int c = t.cols();
        for (int i = 0; i < r; ++i)
            std::copy_n(t.values().data() + static_cast<size_t>(i) * c, c,
                        v.data() + static_cast<size_t>(i) * total + off);
        off += c;
    }
    auto node = make_node({r, total}, std::move(v));
    if (any_grad) {
        node->requires_grad = true;
        for (const Tensor& t : parts) node->parents.push_back(t.node());
        node->backward_fn = [r, total](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            int off2 = 0;
            for (auto& p : self.parents) {
                const int c = p->shape.back();
                if (p->requires_grad) {
                    auto& pg = grad_buffer(*p);
                    for (int i = 0; i < r; ++i) {
                        const double* src = g.data() + static_cast<size_t>(i) * total + off2;
                        double* dst = pg.data() + static_cast<size_t>(i) * c;
                        for (int j = 0; j < c; ++j) dst[j] += src[j];
                    }
                }
                off2 += c;
            }
        };
    }
    return Tensor(node);
}

Tensor slice_cols(const Tensor& a, int col_begin, int col_end) {
    const int r = a.rows(), c = a.cols();
    if (col_begin < 0 || col_end > c || col_begin >= col_end) throw std::invalid_argument("slice_cols: bad column range");
    const int w = col_end - col_begin;
    std::vector<double> v(static_cast<size_t>(r) * w);
    for (int i = 0; i < r; ++i)
        std::copy_n(a.values().data() + static_cast<size_t>(i) * c + col_begin, w, v.data() + static_cast<size_t>(i) * w);
    auto node = make_node({r, w}, std::move(v));
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [r, c, w, col_begin](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (int i = 0; i < r; ++i) {
                const double* src = g.data() + static_cast<size_t>(i) * w;
                double* dst = pg.data() + static_cast<size_t>(i) * c + col_begin;
                for (int j = 0; j < w; ++j) dst[j] += src[j];
            }
        };
    }
    return Tensor(node);
}

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (shape_product(shape) != a.size()) throw std::invalid_argument("reshape: element count mismatch");
    auto node = make_node(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()));
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (size_t i = 0; i < g.size(); ++i) pg[i] += g[i];
        };
    }
    return Tensor(node);
}

namespace {

Tensor reduce_all(const Tensor& a, bool mean) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    const double denom = mean ? static_cast<double>(a.size()) : 1.0;
    auto node = make_node({1}, {s / denom});
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [denom](TensorNode& self) {
            const double g = grad_buffer(self)[0] / denom;
            auto& pg = grad_buffer(*self.parents[0]);
            for (double& x : pg) x += g;
        };
    }
    return Tensor(node);
}

}  // namespace

Tensor sum_all(const Tensor& a) { return reduce_all(a, false); }
Tensor mean_all(const Tensor& a) { return reduce_all(a, true); }

Tensor abs_elem(const Tensor& a) {
    std::vector<double> v(a.values().begin(), a.values().end());
    for (double& x : v) x = std::abs(x);
    auto node = make_node(a.shape(), std::move(v));
    if (track(a)) {
        node->requires_grad = true;
        node->parents = {a.node()};
        node->backward_fn = [](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pa = *self.parents[0];
            auto& pg = grad_buffer(pa);
            for (size_t i = 0; i < g.size(); ++i) {
                const double x = pa.values[i];
                const double sgn = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
                pg[i] += g[i] * sgn;
            }
        };
    }
    return Tensor(node);
}

Tensor bone_directions(const Tensor& coords, const SkeletonTopology& topo) {
    const int j = topo.joint_count();
    const int b = topo.bone_count();
    if (coords.cols() != j * 3) throw std::invalid_argument("bone_directions: coords width must be J*3");
    const int s = coords.rows();
    const auto bones = bone_endpoints(topo);
    std::vector<double> v(static_cast<size_t>(s) * b * 3, 0.0);
    auto lengths = std::make_shared<std::vector<double>>(static_cast<size_t>(s) * b, 0.0);
    for (int f = 0; f < s; ++f) {
        const double* row = coords.values().data() + static_cast<size_t>(f) * j * 3;
        double* out = v.data() + static_cast<size_t>(f) * b * 3;
        for (int k = 0; k < b; ++k) {
            const auto [p, c] = bones[static_cast<size_t>(k)];
            const double ux = row[c * 3 + 0] - row[p * 3 + 0];
            const double uy = row[c * 3 + 1] - row[p * 3 + 1];
            const double uz = row[c * 3 + 2] - row[p * 3 + 2];
            const double len = std::sqrt(ux * ux + uy * uy + uz * uz);
            (*lengths)[static_cast<size_t>(f) * b + k] = len;
            if (len < kDegenerateBoneLength) continue;
            out[k * 3 + 0] = ux / len;
            out[k * 3 + 1] = uy / len;
            out[k * 3 + 2] = uz / len;
        }
    }
    auto node = make_node({s, b * 3}, std::move(v));
    if (track(coords)) {
        node->requires_grad = true;
        node->parents = {coords.node()};
        auto bones_copy = bones;
        node->backward_fn = [s, b, j, bones_copy, lengths](TensorNode& self) {
            const std::vector<double>& g = grad_buffer(self);
            auto& pg = grad_buffer(*self.parents[0]);
            for (int f = 0; f < s; ++f) {
                const double* gr = g.data() + static_cast<size_t>(f) * b * 3;
                const double* dir = self.values.data() + static_cast<size_t>(f) * b * 3;
                double* gx = pg.data() + static_cast<size_t>(f) * j * 3;
                for (int k = 0; k < b; ++k) {
                    const double len = (*lengths)[static_cast<size_t>(f) * b + k];
                    if (len < kDegenerateBoneLength) continue;
                    const auto [p, c] = bones_copy[static_cast<size_t>(k)];
                    // d(u/|u|)/du = (I - dir dir^T)/|u|
                    const double proj =
                        gr[k * 3] * dir[k * 3] + gr[k * 3 + 1] * dir[k * 3 + 1] + gr[k * 3 + 2] * dir[k * 3 + 2];
                    for (int a = 0; a < 3; ++a) {
                        const double du = (gr[k * 3 + a] - dir[k * 3 + a] * proj) / len;
                        gx[c * 3 + a] += du;
                        gx[p * 3 + a] -= du;
                    }
                }
            }
        };
    }
    return Tensor(node);
}

namespace {

void backward_sweep(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) throw std::invalid_argument("backward: scalar loss required");
    // Iterative post-order DFS for the topological order.
    std::vector<TensorNode*> order;
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            TensorNode* parent = node->parents[next++].get();
            if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    grad_buffer(*loss.node())[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorNode* node = *it;
        if (node->requires_grad && node->backward_fn) node->backward_fn(*node);
    }
}

}  // namespace

void backward(const Tensor& loss) { backward_sweep(loss); }

void backward_into(const Tensor& loss, GradMap& sink) {
    t_grad_sink = &sink;
    try {
        backward_sweep(loss);
    } catch (...) {
        t_grad_sink = nullptr;
        throw;
    }
    t_grad_sink = nullptr;
}

void zero_grad(std::span<const Tensor> params) {
    for (const Tensor& p : params) p.node()->grad.assign(p.node()->values.size(), 0.0);
}

double check_gradients(const std::function<Tensor()>& f, std::span<const Tensor> params,
                       const GradCheckOptions& opts) {
    if (opts.step <= 0.0) throw std::invalid_argument("check_gradients: step must be positive");
    Tensor loss = f();
    if (!std::isfinite(loss.item())) throw std::runtime_error("check_gradients: non-finite objective");
    zero_grad(params);
    backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) {
        auto g = p.grad();
        analytic.emplace_back(g.begin(), g.end());
        if (analytic.back().empty()) analytic.back().assign(static_cast<size_t>(p.size()), 0.0);
    }

    Rng sampler(opts.sample_seed);
    double max_rel = 0.0;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi];
        const int n = p.size();
        std::vector<int> coords;
        if (opts.max_coords_per_param < 0 || opts.max_coords_per_param >= n) {
            coords.resize(static_cast<size_t>(n));
            for (int i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            for (int i = 0; i < opts.max_coords_per_param; ++i) coords.push_back(sampler.uniform_int(0, n - 1));
        }
        for (int ci : coords) {
            double* slot = p.data() + ci;
            const double saved = *slot;
            *slot = saved + opts.step;
            const double up = f().item();
            *slot = saved - opts.step;
            const double down = f().item();
            *slot = saved;
            if (!std::isfinite(up) || !std::isfinite(down))
                throw std::runtime_error("check_gradients: non-finite objective under perturbation");
            const double fd = (up - down) / (2.0 * opts.step);
            const double ad = analytic[pi][static_cast<size_t>(ci)];
            const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1e-2});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace signidd
