#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ndgrad {

class DimensionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ContractError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DegenerateVectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

// Floor added inside the cross-entropy log so a zero probability never
// produces -inf.
inline constexpr double kLogFloor = 1e-12;

namespace detail {
struct Node;
}

// Dense row-major double tensor. A Tensor is a value-semantic handle onto a
// shared node of a define-by-run differentiation graph: operations record an
// edge to their inputs, backward() walks the recorded graph. The graph is
// rebuilt from scratch every time a loss is composed; leaves without an edge
// are plain immutable values.
//
// Rank 0 is the scalar shape used by all losses.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double fill);
    static Tensor from_values(Shape shape, std::vector<double> values);
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);
    static Tensor scalar(double value);
    // Leaf that participates in backward(): gradients accumulate into it.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;  // rank-2 only
    bool is_scalar() const { return defined() && rank() == 0; }

    double value() const;                            // scalar only
    double at(std::size_t i) const;                  // rank-1
    double at(std::size_t i, std::size_t j) const;   // rank-2
    const std::vector<double>& values() const;
    // In-place mutation is restricted to leaves (optimizer updates between
    // iterations); mutating a recorded intermediate is a contract violation.
    std::vector<double>& mutable_values();

    bool requires_grad() const;
    bool has_grad() const;
    const std::vector<double>& grad() const;  // ContractError when absent
    std::vector<double>& grad_buffer();       // allocates zeros when absent
    void zero_grad();

    // Stable identity of the underlying node (parameter bookkeeping).
    const void* id() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
    friend struct OpAccess;
};

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// Multiply by a compile-time constant factor.
Tensor scale(const Tensor& a, double factor);
// matrix [m x n] + row vector [n], broadcast over rows.
Tensor add_rowvec(const Tensor& matrix, const Tensor& row);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
// Row-wise softmax with max subtraction; every output row is a probability
// vector.
Tensor softmax_rows(const Tensor& a);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor select_rows(const Tensor& a, const std::vector<std::size_t>& row_indices);
// [m x n] -> [n], mean across rows.
Tensor mean_rows(const Tensor& a);
// Sum of all entries -> scalar.
Tensor sum(const Tensor& a);

// mean over rows of -sum_j target_ij * log(pred_ij + kLogFloor). Every target
// row must sum to 1 within 1e-8.
Tensor cross_entropy(const Tensor& pred_probs, const Tensor& target_probs);
// mean over rows of the squared euclidean distance between paired rows.
Tensor mse(const Tensor& a, const Tensor& b);
// u.v / (|u||v|) for rank-1 tensors of equal length.
Tensor cosine_sim(const Tensor& u, const Tensor& v);

// Reverse-mode sweep from a scalar loss; accumulates into the grad buffers of
// every reachable tensor with requires_grad. Deterministic: the traversal
// order is a function of graph structure only.
void backward(const Tensor& loss);

}  // namespace ndgrad
