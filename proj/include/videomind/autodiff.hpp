#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "videomind/tensor.hpp"

// Reverse-mode differentiation over whole matrices. The decoder's forward pass
// is written once against this tape; inference just never calls backward().
namespace videomind::ad {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Matrix& value() const;
    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
};

class Tape {
public:
    Var constant(Matrix value);
    Var parameter(Matrix value);

    const Matrix& value(Var v) const { return nodes_[v.id].value; }
    /// Accumulated gradient; zero-shaped if the node never received one.
    const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

    /// Seeds d(loss)/d(out) and propagates to every parameter.
    void backward(Var out, const Matrix& seed);

    std::size_t size() const noexcept { return nodes_.size(); }

    // Used by op implementations.
    using Backward = std::function<void(Tape&, std::size_t self)>;
    Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);
    Var record(Matrix value, const std::vector<Var>& parents, Backward backward);
    Matrix& grad_ref(std::size_t id);
    const Matrix& upstream(std::size_t id) const { return nodes_[id].grad; }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        Backward backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_bt(Var a, Var b);
/// x * w + bias, bias broadcast over rows.
Var linear(Var x, Var w, Var bias);
Var add(Var a, Var b);
Var add_rowvec(Var a, Var row);
Var scale(Var a, double factor);
/// Multiplies every entry by the 1x1 variable s.
Var mul_scalar(Var a, Var s);
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
Var gelu(Var x);
Var silu(Var x);
Var sigmoid(Var x);
Var exp(Var x);
Var softmax_rows(Var x);
Var slice_rows(Var x, std::size_t start, std::size_t count);
Var slice_cols(Var x, std::size_t start, std::size_t count);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// Row-major reinterpretation to a new shape with the same element count.
Var reshape(Var x, std::size_t rows, std::size_t cols);
/// Kernel-3, pad-1 unfold: row i becomes [x(i-1), x(i), x(i+1)] with zeros past the ends.
Var unfold3(Var x);
/// Cosine similarity of each row of x with the single row r; returns n x 1.
Var cosine_rows(Var x, Var r);

}  // namespace videomind::ad
