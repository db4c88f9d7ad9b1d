#include "ndgrad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace ndgrad {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backprop;
};

}  // namespace detail

using detail::Node;

namespace {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

void ensure_grad(Node& node) {
    if (node.grad.size() != node.values.size()) node.grad.assign(node.values.size(), 0.0);
}

}  // namespace

struct OpAccess {
    static std::shared_ptr<Node> node(const Tensor& t) { return t.node_; }

    static Tensor make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
        if (shape_size(shape) != values.size())
            throw DimensionError("tensor value count " + std::to_string(values.size()) +
                                 " does not match shape " + shape_to_string(shape));
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        node->values = std::move(values);
        node->requires_grad = requires_grad;
        return Tensor(std::move(node));
    }

    // Records an edge iff any input requires a gradient.
    static Tensor make_op(Shape shape, std::vector<double> values,
                          const std::vector<Tensor>& inputs,
                          std::function<void(Node&)> backprop) {
        Tensor out = make_leaf(std::move(shape), std::move(values), false);
        bool needs_grad = false;
        for (const Tensor& in : inputs)
            if (in.requires_grad()) needs_grad = true;
        if (needs_grad) {
            out.node_->requires_grad = true;
            out.node_->parents.reserve(inputs.size());
            for (const Tensor& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backprop = std::move(backprop);
        }
        return out;
    }
};

namespace {

const std::vector<double>& vals(const Node& n) { return n.values; }

void check_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " +
                             shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
}

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw DimensionError(std::string(op) + ": expected rank-2 tensor, got shape " +
                             shape_to_string(t.shape()));
}

void check_rank1(const Tensor& t, const char* op) {
    if (t.rank() != 1)
        throw DimensionError(std::string(op) + ": expected rank-1 tensor, got shape " +
                             shape_to_string(t.shape()));
}

// Accumulates v into parent p's grad when it participates in the sweep.
inline void accum(Node& p, std::size_t idx, double v) {
    if (p.requires_grad) p.grad[idx] += v;
}

void prepare_parent_grads(Node& out) {
    for (auto& p : out.parents)
        if (p->requires_grad) ensure_grad(*p);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape) {
    std::size_t n = shape_size(shape);
    return OpAccess::make_leaf(std::move(shape), std::vector<double>(n, 0.0), false);
}

Tensor Tensor::full(Shape shape, double fill) {
    std::size_t n = shape_size(shape);
    return OpAccess::make_leaf(std::move(shape), std::vector<double>(n, fill), false);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
    return OpAccess::make_leaf(std::move(shape), std::move(values), false);
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("from_rows: no rows");
    const std::size_t cols = rows.front().size();
    std::vector<double> flat;
    flat.reserve(rows.size() * cols);
    for (const auto& r : rows) {
        if (r.size() != cols)
            throw DimensionError("from_rows: ragged row of length " + std::to_string(r.size()) +
                                 ", expected " + std::to_string(cols));
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return OpAccess::make_leaf({rows.size(), cols}, std::move(flat), false);
}

Tensor Tensor::scalar(double value) { return OpAccess::make_leaf({}, {value}, false); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    return OpAccess::make_leaf(std::move(shape), std::move(values), true);
}

const Shape& Tensor::shape() const {
    check_defined(*this, "shape");
    return node_->shape;
}

std::size_t Tensor::size() const {
    check_defined(*this, "size");
    return node_->values.size();
}

std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::rows() const {
    check_rank2(*this, "rows");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    check_rank2(*this, "cols");
    return node_->shape[1];
}

double Tensor::value() const {
    check_defined(*this, "value");
    if (!is_scalar()) throw ContractError("value: tensor of shape " + shape_to_string(shape()) + " is not a scalar");
    return node_->values[0];
}

double Tensor::at(std::size_t i) const {
    check_rank1(*this, "at");
    return node_->values.at(i);
}

double Tensor::at(std::size_t i, std::size_t j) const {
    check_rank2(*this, "at");
    return node_->values.at(i * node_->shape[1] + j);
}

const std::vector<double>& Tensor::values() const {
    check_defined(*this, "values");
    return node_->values;
}

std::vector<double>& Tensor::mutable_values() {
    check_defined(*this, "mutable_values");
    if (node_->backprop)
        throw ContractError("mutable_values: tensor is a recorded intermediate, not a leaf");
    return node_->values;
}

bool Tensor::requires_grad() const {
    check_defined(*this, "requires_grad");
    return node_->requires_grad;
}

bool Tensor::has_grad() const {
    check_defined(*this, "has_grad");
    return node_->grad.size() == node_->values.size();
}

const std::vector<double>& Tensor::grad() const {
    check_defined(*this, "grad");
    if (!has_grad()) throw ContractError("grad: no gradient has been computed for this tensor");
    return node_->grad;
}

std::vector<double>& Tensor::grad_buffer() {
    check_defined(*this, "grad_buffer");
    ensure_grad(*node_);
    return node_->grad;
}

void Tensor::zero_grad() {
    check_defined(*this, "zero_grad");
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

const void* Tensor::id() const { return node_.get(); }

// ---------------------------------------------------------------------------
// Elementwise ops

Tensor add(const Tensor& a, const Tensor& b) {
    check_defined(a, "add");
    check_defined(b, "add");
    check_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return OpAccess::make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            accum(pa, i, n.grad[i]);
            accum(pb, i, n.grad[i]);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_defined(a, "sub");
    check_defined(b, "sub");
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
    return OpAccess::make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            accum(pa, i, n.grad[i]);
            accum(pb, i, -n.grad[i]);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_defined(a, "mul");
    check_defined(b, "mul");
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return OpAccess::make_op(a.shape(), std::move(out), {a, b}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            accum(pa, i, n.grad[i] * vals(pb)[i]);
            accum(pb, i, n.grad[i] * vals(pa)[i]);
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    check_defined(a, "scale");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * av[i];
    return OpAccess::make_op(a.shape(), std::move(out), {a}, [factor](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) accum(pa, i, factor * n.grad[i]);
    });
}

Tensor add_rowvec(const Tensor& matrix, const Tensor& row) {
    check_defined(matrix, "add_rowvec");
    check_defined(row, "add_rowvec");
    check_rank2(matrix, "add_rowvec");
    check_rank1(row, "add_rowvec");
    if (matrix.cols() != row.size())
        throw DimensionError("add_rowvec: matrix " + shape_to_string(matrix.shape()) +
                             " vs row " + shape_to_string(row.shape()));
    const std::size_t m = matrix.rows(), c = matrix.cols();
    std::vector<double> out(m * c);
    const auto& mv = matrix.values();
    const auto& rv = row.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = mv[i * c + j] + rv[j];
    return OpAccess::make_op(matrix.shape(), std::move(out), {matrix, row}, [m, c](Node& n) {
        prepare_parent_grads(n);
        Node& pm = *n.parents[0];
        Node& pr = *n.parents[1];
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                accum(pm, i * c + j, n.grad[i * c + j]);
                accum(pr, j, n.grad[i * c + j]);
            }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined(a, "matmul");
    check_defined(b, "matmul");
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const auto& av = a.values();
    const auto& bv = b.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
        }
    return OpAccess::make_op({m, n}, std::move(out), {a, b}, [m, k, n](Node& nd) {
        prepare_parent_grads(nd);
        Node& pa = *nd.parents[0];
        Node& pb = *nd.parents[1];
        // dA = G * B^T, dB = A^T * G
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                double s = 0.0;
                for (std::size_t j = 0; j < n; ++j) s += nd.grad[i * n + j] * vals(pb)[p * n + j];
                accum(pa, i * k + p, s);
            }
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = 0; i < m; ++i) s += vals(pa)[i * k + p] * nd.grad[i * n + j];
                accum(pb, p * n + j, s);
            }
    });
}

Tensor relu(const Tensor& a) {
    check_defined(a, "relu");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    return OpAccess::make_op(a.shape(), std::move(out), {a}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i)
            accum(pa, i, vals(pa)[i] > 0.0 ? n.grad[i] : 0.0);
    });
}

Tensor log(const Tensor& a) {
    check_defined(a, "log");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::log(av[i]);
    return OpAccess::make_op(a.shape(), std::move(out), {a}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) accum(pa, i, n.grad[i] / vals(pa)[i]);
    });
}

Tensor exp(const Tensor& a) {
    check_defined(a, "exp");
    std::vector<double> out(a.size());
    const auto& av = a.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(av[i]);
    return OpAccess::make_op(a.shape(), std::move(out), {a}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        for (std::size_t i = 0; i < n.grad.size(); ++i) accum(pa, i, n.grad[i] * n.values[i]);
    });
}

Tensor softmax_rows(const Tensor& a) {
    check_defined(a, "softmax_rows");
    check_rank2(a, "softmax_rows");
    const std::size_t m = a.rows(), c = a.cols();
    std::vector<double> out(m * c);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mx = av[i * c];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, av[i * c + j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(av[i * c + j] - mx);
            denom += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= denom;
    }
    return OpAccess::make_op(a.shape(), std::move(out), {a}, [m, c](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        // dz_j = p_j * (g_j - sum_k g_k p_k), row-wise
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += n.grad[i * c + j] * n.values[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                accum(pa, i * c + j, n.values[i * c + j] * (n.grad[i * c + j] - dot));
        }
    });
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    check_defined(a, "concat_rows");
    check_defined(b, "concat_rows");
    check_rank2(a, "concat_rows");
    check_rank2(b, "concat_rows");
    if (a.cols() != b.cols())
        throw DimensionError("concat_rows: column counts differ, " + shape_to_string(a.shape()) +
                             " vs " + shape_to_string(b.shape()));
    const std::size_t ma = a.rows(), mb = b.rows(), c = a.cols();
    std::vector<double> out;
    out.reserve((ma + mb) * c);
    out.insert(out.end(), a.values().begin(), a.values().end());
    out.insert(out.end(), b.values().begin(), b.values().end());
    return OpAccess::make_op({ma + mb, c}, std::move(out), {a, b}, [ma, c](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        const std::size_t split = ma * c;
        for (std::size_t i = 0; i < split; ++i) accum(pa, i, n.grad[i]);
        for (std::size_t i = split; i < n.grad.size(); ++i) accum(pb, i - split, n.grad[i]);
    });
}

Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& row_indices) {
    check_defined(a, "select_rows");
    check_rank2(a, "select_rows");
    const std::size_t m = a.rows(), c = a.cols();
    for (std::size_t r : row_indices)
        if (r >= m)
            throw DimensionError("select_rows: index " + std::to_string(r) +
                                 " out of range for " + shape_to_string(a.shape()));
    std::vector<double> out(row_indices.size() * c);
    const auto& av = a.values();
    for (std::size_t i = 0; i < row_indices.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = av[row_indices[i] * c + j];
    return OpAccess::make_op({row_indices.size(), c}, std::move(out), {a},
                             [idx = row_indices, c](Node& n) {
                                 prepare_parent_grads(n);
                                 Node& pa = *n.parents[0];
                                 for (std::size_t i = 0; i < idx.size(); ++i)
                                     for (std::size_t j = 0; j < c; ++j)
                                         accum(pa, idx[i] * c + j, n.grad[i * c + j]);
                             });
}

Tensor mean_rows(const Tensor& a) {
    check_defined(a, "mean_rows");
    check_rank2(a, "mean_rows");
    const std::size_t m = a.rows(), c = a.cols();
    if (m == 0) throw ValidationError("mean_rows: empty matrix");
    std::vector<double> out(c, 0.0);
    const auto& av = a.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += av[i * c + j];
    for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(m);
    return OpAccess::make_op({c}, std::move(out), {a}, [m, c](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) accum(pa, i * c + j, n.grad[j] * inv);
    });
}

Tensor sum(const Tensor& a) {
    check_defined(a, "sum");
    double s = 0.0;
    for (double v : a.values()) s += v;
    return OpAccess::make_op({}, {s}, {a}, [](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        for (std::size_t i = 0; i < vals(pa).size(); ++i) accum(pa, i, n.grad[0]);
    });
}

Tensor cross_entropy(const Tensor& pred_probs, const Tensor& target_probs) {
    check_defined(pred_probs, "cross_entropy");
    check_defined(target_probs, "cross_entropy");
    check_rank2(pred_probs, "cross_entropy");
    check_same_shape(pred_probs, target_probs, "cross_entropy");
    const std::size_t m = pred_probs.rows(), c = pred_probs.cols();
    if (m == 0) throw ValidationError("cross_entropy: empty batch");
    const auto& tv = target_probs.values();
    for (std::size_t i = 0; i < m; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) row_sum += tv[i * c + j];
        if (std::abs(row_sum - 1.0) > 1e-8)
            throw ValidationError("cross_entropy: target row " + std::to_string(i) +
                                  " sums to " + std::to_string(row_sum) + ", expected 1");
    }
    const auto& pv = pred_probs.values();
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < c; ++j)
            row -= tv[i * c + j] * std::log(pv[i * c + j] + kLogFloor);
        loss += row;
    }
    loss /= static_cast<double>(m);
    return OpAccess::make_op({}, {loss}, {pred_probs, target_probs}, [m, c](Node& n) {
        prepare_parent_grads(n);
        Node& pp = *n.parents[0];
        Node& pt = *n.parents[1];
        const double g = n.grad[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < c; ++j) {
                const double p = vals(pp)[i * c + j];
                const double t = vals(pt)[i * c + j];
                accum(pp, i * c + j, -g * t / (p + kLogFloor));
                accum(pt, i * c + j, -g * std::log(p + kLogFloor));
            }
    });
}

Tensor mse(const Tensor& a, const Tensor& b) {
    check_defined(a, "mse");
    check_defined(b, "mse");
    check_rank2(a, "mse");
    check_same_shape(a, b, "mse");
    const std::size_t m = a.rows(), c = a.cols();
    if (m == 0) throw ValidationError("mse: empty batch");
    const auto& av = a.values();
    const auto& bv = b.values();
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            const double d = av[i * c + j] - bv[i * c + j];
            row += d * d;
        }
        loss += row;
    }
    loss /= static_cast<double>(m);
    return OpAccess::make_op({}, {loss}, {a, b}, [m, c](Node& n) {
        prepare_parent_grads(n);
        Node& pa = *n.parents[0];
        Node& pb = *n.parents[1];
        const double g = 2.0 * n.grad[0] / static_cast<double>(m);
        for (std::size_t i = 0; i < m * c; ++i) {
            const double d = vals(pa)[i] - vals(pb)[i];
            accum(pa, i, g * d);
            accum(pb, i, -g * d);
        }
    });
}

Tensor cosine_sim(const Tensor& u, const Tensor& v) {
    check_defined(u, "cosine_sim");
    check_defined(v, "cosine_sim");
    check_rank1(u, "cosine_sim");
    check_rank1(v, "cosine_sim");
    check_same_shape(u, v, "cosine_sim");
    const auto& uv = u.values();
    const auto& vv = v.values();
    double dot = 0.0, nu2 = 0.0, nv2 = 0.0;
    for (std::size_t i = 0; i < uv.size(); ++i) {
        dot += uv[i] * vv[i];
        nu2 += uv[i] * uv[i];
        nv2 += vv[i] * vv[i];
    }
    const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
    if (nu == 0.0 || nv == 0.0)
        throw DegenerateVectorError("cosine_sim: zero-norm input vector");
    const double cosv = dot / (nu * nv);
    return OpAccess::make_op({}, {cosv}, {u, v}, [nu, nv, cosv](Node& n) {
        prepare_parent_grads(n);
        Node& pu = *n.parents[0];
        Node& pv = *n.parents[1];
        const double g = n.grad[0];
        for (std::size_t i = 0; i < vals(pu).size(); ++i) {
            accum(pu, i, g * (vals(pv)[i] / (nu * nv) - cosv * vals(pu)[i] / (nu * nu)));
            accum(pv, i, g * (vals(pu)[i] / (nu * nv) - cosv * vals(pv)[i] / (nv * nv)));
        }
    });
}

// ---------------------------------------------------------------------------
// Backward sweep

void backward(const Tensor& loss) {
    check_defined(loss, "backward");
    if (!loss.is_scalar())
        throw ContractError("backward: loss has shape " + shape_to_string(loss.shape()) +
                            ", expected a scalar");
    auto root = OpAccess::node(loss);
    if (!root->requires_grad) return;  // nothing reachable needs a gradient

    // Iterative post-order DFS over parents; reverse post-order is a
    // topological order with consumers before producers. Only nodes that
    // require a gradient are visited.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        Node* node = stack.back().first;
        const std::size_t next_child = stack.back().second;
        if (next_child < node->parents.size()) {
            ++stack.back().second;
            Node* p = node->parents[next_child].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    // Fresh sweep: the whole reachable set starts from zero, so repeated
    // backward calls over the same graph yield identical gradients.
    for (Node* node : order) {
        node->grad.assign(node->values.size(), 0.0);
    }
    root->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop(**it);
}

}  // namespace ndgrad
