#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

// Dense 1-D/2-D f64 tensors with reverse-mode automatic differentiation.
// Every op builds the graph eagerly; backward() replays it in reverse
// topological order. Sized for desk-scale models, not GPUs.

namespace gsnias::ad {

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

// RAII switch that disables graph recording on the current thread.
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

struct Node {
    int rows = 0;
    int cols = 0;  // 0 => 1-D vector of length `rows`
    std::vector<double> value;
    std::vector<double> grad;  // allocated lazily
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;  // pushes self.grad into parents

    bool is_matrix() const { return cols > 0; }
    size_t size() const { return value.size(); }
    bool is_leaf() const { return parents.empty(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor vector(std::vector<double> data, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->rows = static_cast<int>(data.size());
        n->cols = 0;
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor zeros_vector(int len, bool requires_grad = false) {
        return vector(std::vector<double>(static_cast<size_t>(len), 0.0), requires_grad);
    }

    static Tensor matrix(int rows, int cols, std::vector<double> data,
                         bool requires_grad = false) {
        if (static_cast<size_t>(rows) * cols != data.size())
            throw std::invalid_argument("Tensor::matrix: data length does not match shape");
        auto n = std::make_shared<Node>();
        n->rows = rows;
        n->cols = cols;
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    static Tensor zeros_matrix(int rows, int cols, bool requires_grad = false) {
        return matrix(rows, cols, std::vector<double>(static_cast<size_t>(rows) * cols, 0.0),
                      requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return vector({v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }
    const std::shared_ptr<Node>& node() const { return node_; }

    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    bool is_matrix() const { return node_->is_matrix(); }
    size_t size() const { return node_->size(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<double>& value() { return node_->value; }
    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& grad() {
        node_->ensure_grad();
        return node_->grad;
    }

    double item() const {
        if (node_->size() != 1)
            throw std::invalid_argument("Tensor::item: tensor is not scalar");
        return node_->value[0];
    }

    double at(int i) const { return node_->value[static_cast<size_t>(i)]; }
    double at(int r, int c) const {
        return node_->value[static_cast<size_t>(r) * node_->cols + c];
    }

    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
    }

    std::string shape_str() const {
        std::ostringstream os;
        if (is_matrix())
            os << "(" << rows() << "x" << cols() << ")";
        else
            os << "(" << rows() << ")";
        return os.str();
    }

private:
    std::shared_ptr<Node> node_;
};

namespace detail {

inline void shape_error(const std::string& op, const Tensor& a) {
    throw std::invalid_argument(op + ": incompatible shape " + a.shape_str());
}

inline void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + ": incompatible shapes " + a.shape_str() + " and " +
                                b.shape_str());
}

inline Tensor make_op(int rows, int cols, std::vector<double> value,
                      std::vector<Tensor> parents, std::function<void(Node&)> backward) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(value);
    bool track = false;
    if (grad_mode()) {
        for (const auto& p : parents)
            if (p.node()->requires_grad) track = true;
    }
    if (track) {
        n->requires_grad = true;
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backward_fn = std::move(backward);
    }
    return Tensor(n);
}

}  // namespace detail

// Topologically ordered record of the ops reachable from a root node.
// Creation order is not stored on the nodes, so the order is rebuilt here by
// iterative post-order DFS; the reverse sweep visits each node exactly once.
class ComputationTape {
public:
    explicit ComputationTape(const std::shared_ptr<Node>& root) {
        std::unordered_set<Node*> visited;
        // stack of (node, next-parent-to-visit)
        std::vector<std::pair<std::shared_ptr<Node>, size_t>> stack;
        if (root->requires_grad) {
            stack.emplace_back(root, 0);
            visited.insert(root.get());
        }
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                auto parent = node->parents[idx++];
                if (parent->requires_grad && visited.insert(parent.get()).second)
                    stack.emplace_back(parent, 0);
            } else {
                order_.push_back(node);
                stack.pop_back();
            }
        }
    }

    size_t size() const { return order_.size(); }

    // Seeds d(root)/d(root) = 1 and sweeps in reverse topological order.
    // Leaf gradients accumulate across calls; interior buffers are reset per
    // sweep so repeated backward() calls stay correct.
    void backward() {
        if (order_.empty()) return;
        for (auto& n : order_) {
            if (!n->is_leaf()) {
                n->grad.assign(n->value.size(), 0.0);
            } else {
                n->ensure_grad();
            }
            // untracked parents still receive writes from backward rules;
            // give them scratch buffers
            for (auto& p : n->parents) p->ensure_grad();
        }
        order_.back()->grad[0] += 1.0;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node& n = **it;
            if (n.backward_fn) n.backward_fn(n);
        }
    }

private:
    std::vector<std::shared_ptr<Node>> order_;  // parents before children
};

inline void backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw std::invalid_argument("backward: loss must be scalar, got " + loss.shape_str());
    ComputationTape tape(loss.node());
    tape.backward();
}

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_error("add", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(out), {a, b},
                           [pa = a.node(), pb = b.node()](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i) {
                                   pa->grad[i] += self.grad[i];
                                   pb->grad[i] += self.grad[i];
                               }
                           });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_error("sub", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(out), {a, b},
                           [pa = a.node(), pb = b.node()](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i) {
                                   pa->grad[i] += self.grad[i];
                                   pb->grad[i] -= self.grad[i];
                               }
                           });
}

// Elementwise product. One side may be a scalar tensor, which broadcasts.
inline Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.size() == 1 && b.size() > 1) return mul(b, a);
    if (b.size() == 1 && a.size() > 1) {
        const double s = b.value()[0];
        std::vector<double> out(a.size());
        for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
        return detail::make_op(a.rows(), a.cols(), std::move(out), {a, b},
                               [pa = a.node(), pb = b.node()](Node& self) {
                                   const double sv = pb->value[0];
                                   double acc = 0.0;
                                   for (size_t i = 0; i < self.size(); ++i) {
                                       pa->grad[i] += self.grad[i] * sv;
                                       acc += self.grad[i] * pa->value[i];
                                   }
                                   pb->grad[0] += acc;
                               });
    }
    if (a.rows() != b.rows() || a.cols() != b.cols()) detail::shape_error("mul", a, b);
    std::vector<double> out(a.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
    return detail::make_op(a.rows(), a.cols(), std::move(out), {a, b},
                           [pa = a.node(), pb = b.node()](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i) {
                                   pa->grad[i] += self.grad[i] * pb->value[i];
                                   pb->grad[i] += self.grad[i] * pa->value[i];
                               }
                           });
}

// out = s*x + c, elementwise with plain-double coefficients.
inline Tensor affine(const Tensor& x, double s, double c) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = s * x.value()[i] + c;
    return detail::make_op(x.rows(), x.cols(), std::move(out), {x},
                           [px = x.node(), s](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i)
                                   px->grad[i] += self.grad[i] * s;
                           });
}

inline Tensor scale(const Tensor& x, double s) { return affine(x, s, 0.0); }

inline Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x.value()[i]));
    return detail::make_op(x.rows(), x.cols(), std::move(out), {x},
                           [px = x.node()](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i) {
                                   const double y = self.value[i];
                                   px->grad[i] += self.grad[i] * y * (1.0 - y);
                               }
                           });
}

inline Tensor tanh(const Tensor& x) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x.value()[i]);
    return detail::make_op(x.rows(), x.cols(), std::move(out), {x},
                           [px = x.node()](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i) {
                                   const double y = self.value[i];
                                   px->grad[i] += self.grad[i] * (1.0 - y * y);
                               }
                           });
}

inline Tensor leaky_relu(const Tensor& x, double slope = 0.01) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) {
        const double v = x.value()[i];
        out[i] = v > 0.0 ? v : slope * v;
    }
    return detail::make_op(x.rows(), x.cols(), std::move(out), {x},
                           [px = x.node(), slope](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i)
                                   px->grad[i] +=
                                       self.grad[i] * (px->value[i] > 0.0 ? 1.0 : slope);
                           });
}

// Natural log with a lower clamp: ln(max(x, floor)). Gradient is zero in
// the clamped region. floor = 0 gives a plain log.
inline Tensor log(const Tensor& x, double floor = 0.0) {
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(std::max(x.value()[i], floor));
    return detail::make_op(x.rows(), x.cols(), std::move(out), {x},
                           [px = x.node(), floor](Node& self) {
                               for (size_t i = 0; i < self.size(); ++i)
                                   if (px->value[i] > floor)
                                       px->grad[i] += self.grad[i] / px->value[i];
                           });
}

inline Tensor sum(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.value()) acc += v;
    return detail::make_op(1, 0, {acc}, {x}, [px = x.node()](Node& self) {
        const double g = self.grad[0];
        for (size_t i = 0; i < px->value.size(); ++i) px->grad[i] += g;
    });
}

inline Tensor mean(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.value()) acc += v;
    const double n = static_cast<double>(x.size());
    return detail::make_op(1, 0, {acc / n}, {x}, [px = x.node(), n](Node& self) {
        const double g = self.grad[0] / n;
        for (size_t i = 0; i < px->value.size(); ++i) px->grad[i] += g;
    });
}

// ---------------------------------------------------------------------------
// Softmax (max-subtracted for stability)
// ---------------------------------------------------------------------------

namespace detail {
inline void softmax_span(const double* in, double* out, int n) {
    double mx = in[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, in[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        out[i] = std::exp(in[i] - mx);
        z += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= z;
}
}  // namespace detail

inline Tensor softmax(const Tensor& x) {
    if (x.is_matrix() || x.rows() == 0) detail::shape_error("softmax", x);
    for (double v : x.value())
        if (!std::isfinite(v)) throw std::invalid_argument("softmax: non-finite input");
    std::vector<double> out(x.size());
    detail::softmax_span(x.value().data(), out.data(), x.rows());
    return detail::make_op(x.rows(), 0, std::move(out), {x}, [px = x.node()](Node& self) {
        double dot = 0.0;
        for (size_t i = 0; i < self.size(); ++i) dot += self.grad[i] * self.value[i];
        for (size_t i = 0; i < self.size(); ++i)
            px->grad[i] += self.value[i] * (self.grad[i] - dot);
    });
}

inline Tensor softmax_rows(const Tensor& x) {
    if (!x.is_matrix()) detail::shape_error("softmax_rows", x);
    for (double v : x.value())
        if (!std::isfinite(v)) throw std::invalid_argument("softmax_rows: non-finite input");
    const int r = x.rows(), c = x.cols();
    std::vector<double> out(x.size());
    for (int i = 0; i < r; ++i)
        detail::softmax_span(x.value().data() + static_cast<size_t>(i) * c,
                             out.data() + static_cast<size_t>(i) * c, c);
    return detail::make_op(r, c, std::move(out), {x}, [px = x.node(), r, c](Node& self) {
        for (int i = 0; i < r; ++i) {
            const size_t off = static_cast<size_t>(i) * c;
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += self.grad[off + j] * self.value[off + j];
            for (int j = 0; j < c; ++j)
                px->grad[off + j] += self.value[off + j] * (self.grad[off + j] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// Matrix products
// ---------------------------------------------------------------------------

// C = A * B, (m x k)(k x n) -> (m x n)
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (!a.is_matrix() || !b.is_matrix() || a.cols() != b.rows())
        detail::shape_error("matmul", a, b);
    const int m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(static_cast<size_t>(m) * n, 0.0);
    const double* av = a.value().data();
    const double* bv = b.value().data();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<size_t>(i) * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(p) * n;
            double* crow = out.data() + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    return detail::make_op(
        m, n, std::move(out), {a, b}, [pa = a.node(), pb = b.node(), m, k, n](Node& self) {
            // dA += dC * B^T ; dB += A^T * dC
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = self.grad[static_cast<size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                        pa->grad[static_cast<size_t>(i) * k + p] +=
                            g * pb->value[static_cast<size_t>(p) * n + j];
                        pb->grad[static_cast<size_t>(p) * n + j] +=
                            g * pa->value[static_cast<size_t>(i) * k + p];
                    }
                }
        });
}

// C = A * B^T, (m x k)(n x k) -> (m x n)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (!a.is_matrix() || !b.is_matrix() || a.cols() != b.cols())
        detail::shape_error("matmul_nt", a, b);
    const int m = a.rows(), k = a.cols(), n = b.rows();
    std::vector<double> out(static_cast<size_t>(m) * n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double* arow = a.value().data() + static_cast<size_t>(i) * k;
            const double* brow = b.value().data() + static_cast<size_t>(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
            out[static_cast<size_t>(i) * n + j] = acc;
        }
    return detail::make_op(
        m, n, std::move(out), {a, b}, [pa = a.node(), pb = b.node(), m, k, n](Node& self) {
            // dA += dC * B ; dB += dC^T * A
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double g = self.grad[static_cast<size_t>(i) * n + j];
                    if (g == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                        pa->grad[static_cast<size_t>(i) * k + p] +=
                            g * pb->value[static_cast<size_t>(j) * k + p];
                        pb->grad[static_cast<size_t>(j) * k + p] +=
                            g * pa->value[static_cast<size_t>(i) * k + p];
                    }
                }
        });
}

// y = A * x, (m x k)(k) -> (m)
inline Tensor matvec(const Tensor& a, const Tensor& x) {
    if (!a.is_matrix() || x.is_matrix() || a.cols() != x.rows())
        detail::shape_error("matvec", a, x);
    const int m = a.rows(), k = a.cols();
    std::vector<double> out(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        const double* arow = a.value().data() + static_cast<size_t>(i) * k;
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += arow[p] * x.value()[p];
        out[i] = acc;
    }
    return detail::make_op(m, 0, std::move(out), {a, x},
                           [pa = a.node(), px = x.node(), m, k](Node& self) {
                               for (int i = 0; i < m; ++i) {
                                   const double g = self.grad[i];
                                   if (g == 0.0) continue;
                                   for (int p = 0; p < k; ++p) {
                                       pa->grad[static_cast<size_t>(i) * k + p] +=
                                           g * px->value[p];
                                       px->grad[p] +=
                                           g * pa->value[static_cast<size_t>(i) * k + p];
                                   }
                               }
                           });
}

// y = A^T * x, (m x k)^T (m) -> (k)
inline Tensor matvec_t(const Tensor& a, const Tensor& x) {
    if (!a.is_matrix() || x.is_matrix() || a.rows() != x.rows())
        detail::shape_error("matvec_t", a, x);
    const int m = a.rows(), k = a.cols();
    std::vector<double> out(static_cast<size_t>(k), 0.0);
    for (int i = 0; i < m; ++i) {
        const double xi = x.value()[i];
        if (xi == 0.0) continue;
        const double* arow = a.value().data() + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) out[p] += arow[p] * xi;
    }
    return detail::make_op(k, 0, std::move(out), {a, x},
                           [pa = a.node(), px = x.node(), m, k](Node& self) {
                               for (int i = 0; i < m; ++i) {
                                   double acc = 0.0;
                                   for (int p = 0; p < k; ++p) {
                                       pa->grad[static_cast<size_t>(i) * k + p] +=
                                           self.grad[p] * px->value[i];
                                       acc += self.grad[p] *
                                              pa->value[static_cast<size_t>(i) * k + p];
                                   }
                                   px->grad[i] += acc;
                               }
                           });
}

// M + 1 v^T : adds v to every row of M.
inline Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    if (!m.is_matrix() || v.is_matrix() || m.cols() != v.rows())
        detail::shape_error("add_rowvec", m, v);
    const int r = m.rows(), c = m.cols();
    std::vector<double> out(m.size());
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
            out[static_cast<size_t>(i) * c + j] =
                m.value()[static_cast<size_t>(i) * c + j] + v.value()[j];
    return detail::make_op(r, c, std::move(out), {m, v},
                           [pm = m.node(), pv = v.node(), r, c](Node& self) {
                               for (int i = 0; i < r; ++i)
                                   for (int j = 0; j < c; ++j) {
                                       const double g = self.grad[static_cast<size_t>(i) * c + j];
                                       pm->grad[static_cast<size_t>(i) * c + j] += g;
                                       pv->grad[j] += g;
                                   }
                           });
}

// ---------------------------------------------------------------------------
// Indexing / assembly
// ---------------------------------------------------------------------------

// Gathers rows of a matrix: out[k] = M[idx[k]].
inline Tensor index_select(const Tensor& m, std::vector<int> idx) {
    if (!m.is_matrix()) detail::shape_error("index_select", m);
    const int c = m.cols();
    for (int i : idx)
        if (i < 0 || i >= m.rows())
            throw std::invalid_argument("index_select: row index out of range");
    const int out_rows = static_cast<int>(idx.size());
    std::vector<double> out(idx.size() * static_cast<size_t>(c));
    for (size_t k = 0; k < idx.size(); ++k)
        std::copy_n(m.value().data() + static_cast<size_t>(idx[k]) * c, c,
                    out.data() + k * c);
    return detail::make_op(out_rows, c, std::move(out), {m},
                           [pm = m.node(), idx = std::move(idx), c](Node& self) {
                               for (size_t k = 0; k < idx.size(); ++k)
                                   for (int j = 0; j < c; ++j)
                                       pm->grad[static_cast<size_t>(idx[k]) * c + j] +=
                                           self.grad[k * c + j];
                           });
}

// Extracts one row of a matrix as a 1-D vector.
inline Tensor row(const Tensor& m, int i) {
    if (!m.is_matrix() || i < 0 || i >= m.rows()) detail::shape_error("row", m);
    const int c = m.cols();
    std::vector<double> out(m.value().begin() + static_cast<size_t>(i) * c,
                            m.value().begin() + static_cast<size_t>(i + 1) * c);
    return detail::make_op(c, 0, std::move(out), {m}, [pm = m.node(), i, c](Node& self) {
        for (int j = 0; j < c; ++j) pm->grad[static_cast<size_t>(i) * c + j] += self.grad[j];
    });
}

// out[b] = M[b, cols[b]]
inline Tensor gather_cols(const Tensor& m, std::vector<int> cols) {
    if (!m.is_matrix() || static_cast<int>(cols.size()) != m.rows())
        detail::shape_error("gather_cols", m);
    const int c = m.cols();
    for (int j : cols)
        if (j < 0 || j >= c) throw std::invalid_argument("gather_cols: column out of range");
    const int out_rows = static_cast<int>(cols.size());
    std::vector<double> out(cols.size());
    for (size_t b = 0; b < cols.size(); ++b) out[b] = m.value()[b * c + cols[b]];
    return detail::make_op(out_rows, 0, std::move(out), {m},
                           [pm = m.node(), cols = std::move(cols), c](Node& self) {
                               for (size_t b = 0; b < cols.size(); ++b)
                                   pm->grad[b * c + cols[b]] += self.grad[b];
                           });
}

// Scalar tensor holding v[i].
inline Tensor element(const Tensor& v, int i) {
    if (v.is_matrix() || i < 0 || i >= v.rows()) detail::shape_error("element", v);
    return detail::make_op(1, 0, {v.value()[static_cast<size_t>(i)]}, {v},
                           [pv = v.node(), i](Node& self) { pv->grad[i] += self.grad[0]; });
}

inline Tensor concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    size_t total = 0;
    for (const auto& p : parts) {
        if (p.is_matrix()) detail::shape_error("concat", p);
        total += p.size();
    }
    std::vector<double> out;
    out.reserve(total);
    for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
    std::vector<std::shared_ptr<Node>> pnodes;
    for (const auto& p : parts) pnodes.push_back(p.node());
    return detail::make_op(static_cast<int>(total), 0, std::move(out), parts,
                           [pnodes = std::move(pnodes)](Node& self) {
                               size_t off = 0;
                               for (auto& pn : pnodes) {
                                   for (size_t i = 0; i < pn->value.size(); ++i)
                                       pn->grad[i] += self.grad[off + i];
                                   off += pn->value.size();
                               }
                           });
}

// Stacks equal-length 1-D vectors as the rows of a matrix.
inline Tensor stack_rows(const std::vector<Tensor>& rows_in) {
    if (rows_in.empty()) throw std::invalid_argument("stack_rows: no inputs");
    const int c = rows_in[0].rows();
    for (const auto& r : rows_in)
        if (r.is_matrix() || r.rows() != c) detail::shape_error("stack_rows", r);
    std::vector<double> out;
    out.reserve(rows_in.size() * static_cast<size_t>(c));
    for (const auto& r : rows_in) out.insert(out.end(), r.value().begin(), r.value().end());
    std::vector<std::shared_ptr<Node>> pnodes;
    for (const auto& r : rows_in) pnodes.push_back(r.node());
    return detail::make_op(static_cast<int>(rows_in.size()), c, std::move(out), rows_in,
                           [pnodes = std::move(pnodes), c](Node& self) {
                               for (size_t k = 0; k < pnodes.size(); ++k)
                                   for (int j = 0; j < c; ++j)
                                       pnodes[k]->grad[j] +=
                                           self.grad[k * static_cast<size_t>(c) + j];
                           });
}

// ---------------------------------------------------------------------------
// Unit normalization
// ---------------------------------------------------------------------------

inline constexpr double kDegenerateNorm = 1e-12;

// x / ||x||_2. Throws on vectors with norm <= 1e-12.
inline Tensor l2_normalize(const Tensor& x) {
    if (x.is_matrix()) detail::shape_error("l2_normalize", x);
    double nsq = 0.0;
    for (double v : x.value()) nsq += v * v;
    const double n = std::sqrt(nsq);
    if (!(n > kDegenerateNorm)) throw std::runtime_error("l2_normalize: degenerate vector");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.value()[i] / n;
    return detail::make_op(x.rows(), 0, std::move(out), {x}, [px = x.node(), n](Node& self) {
        // d(x/n)/dx = (I - y y^T) / n
        double dot = 0.0;
        for (size_t i = 0; i < self.size(); ++i) dot += self.grad[i] * self.value[i];
        for (size_t i = 0; i < self.size(); ++i)
            px->grad[i] += (self.grad[i] - self.value[i] * dot) / n;
    });
}

// Row-wise unit normalization of a matrix.
inline Tensor normalize_rows(const Tensor& m) {
    if (!m.is_matrix()) detail::shape_error("normalize_rows", m);
    const int r = m.rows(), c = m.cols();
    std::vector<double> out(m.size());
    std::vector<double> norms(static_cast<size_t>(r));
    for (int i = 0; i < r; ++i) {
        const double* src = m.value().data() + static_cast<size_t>(i) * c;
        double nsq = 0.0;
        for (int j = 0; j < c; ++j) nsq += src[j] * src[j];
        const double n = std::sqrt(nsq);
        if (!(n > kDegenerateNorm))
            throw std::runtime_error("normalize_rows: degenerate vector at row " +
                                     std::to_string(i));
        norms[i] = n;
        for (int j = 0; j < c; ++j) out[static_cast<size_t>(i) * c + j] = src[j] / n;
    }
    return detail::make_op(r, c, std::move(out), {m},
                           [pm = m.node(), norms = std::move(norms), r, c](Node& self) {
                               for (int i = 0; i < r; ++i) {
                                   const size_t off = static_cast<size_t>(i) * c;
                                   double dot = 0.0;
                                   for (int j = 0; j < c; ++j)
                                       dot += self.grad[off + j] * self.value[off + j];
                                   for (int j = 0; j < c; ++j)
                                       pm->grad[off + j] +=
                                           (self.grad[off + j] - self.value[off + j] * dot) /
                                           norms[i];
                               }
                           });
}

}  // namespace gsnias::ad
