#pragma once

// Reverse-mode differentiation over dense matrices. Eager evaluation: each
// op computes its value when created and records itself on a tape; backward
// walks the tape in reverse over the nodes reachable from the root.
//
// The op set is fixed — every network in this project is expressed with the
// ops below, no general broadcasting. Gradients accumulate (+=) into bound
// parameters and must be zeroed between steps by the caller.

#include <cstdint>
#include <deque>
#include <vector>

#include "shad/matrix.hpp"

namespace shad {

// A named parameter array with its gradient slot. Owned by ParamStore (or
// test code); graphs bind to it via Graph::param and accumulate into grad.
struct Param {
    Matrix value;
    Matrix grad;
    bool trainable = true;

    explicit Param(Matrix v, bool train = true)
        : value(std::move(v)), grad(value.rows(), value.cols()), trainable(train) {}
    Param() = default;

    void zero_grad() { grad.set_zero(); }
};

// Per-channel standardization recipe, precomputed by the caller from batch
// and running statistics. center/inv_std define (x - center) * inv_std;
// the active flags mark channels whose center / variance depend on the
// batch (entries 0 or 1), which switches the corresponding backward terms.
struct StandardizeSpec {
    Matrix center;       // 1 x d
    Matrix inv_std;      // 1 x d
    Matrix batch_mean;   // 1 x d
    Matrix mean_active;  // 1 x d, 0/1
    Matrix var_active;   // 1 x d, 0/1
};

class Graph;

// Lightweight handle to a tape entry. Valid as long as its Graph lives.
struct Node {
    Graph* graph = nullptr;
    int idx = -1;

    const Matrix& value() const;
    const Matrix& grad() const;
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
    double scalar() const { return value()(0, 0); }
    bool valid() const { return graph != nullptr && idx >= 0; }
};

class Graph {
public:
    // --- leaves ---
    Node constant(Matrix value);
    Node param(Param& p);

    // --- ops (each checks shapes and finiteness of its result) ---
    Node matmul(Node a, Node b);
    // out[i,j] = gamma[j] * x[i,j] + beta[j]; gamma, beta are 1 x d.
    Node rowwise_affine(Node x, Node gamma, Node beta);
    Node log_softmax(Node x);
    Node add(Node a, Node b);
    Node sub(Node a, Node b);
    Node mul(Node a, Node b);
    Node relu(Node x);
    // Mean over rows: n x d -> 1 x d.
    Node mean_rows(Node x);
    Node scale(Node x, double a);
    Node exp(Node x);
    // Natural log with the input floored at kLogFloor; gradient is zero
    // below the floor.
    Node log(Node x);
    // Sum of all entries -> 1 x 1.
    Node reduce_sum(Node x);
    Node slice_cols(Node x, int start, int len);
    Node reshape(Node x, int rows, int cols);
    Node standardize(Node x, StandardizeSpec spec);

    // Backward from a 1x1 root. Seeds d(root)/d(root) = 1, sweeps the tape
    // in reverse visiting each reachable node exactly once, and accumulates
    // into every bound Param's grad.
    void backward(Node root);

    int num_nodes() const { return static_cast<int>(tape_.size()); }

    static constexpr double kLogFloor = 1e-12;

private:
    friend struct Node;

    enum class Op : uint8_t {
        leaf, matmul, rowwise_affine, log_softmax, add, sub, mul, relu,
        mean_rows, scale, exp_, log_, reduce_sum, slice_cols, reshape,
        standardize,
    };

    struct TapeNode {
        Op op;
        int a = -1, b = -1, c = -1;  // parent indices
        Matrix value;
        Matrix grad;
        double alpha = 0.0;          // scale factor
        int i0 = 0, i1 = 0;          // slice/reshape arguments
        Param* bound = nullptr;      // leaf binding
        std::vector<Matrix> aux;     // standardize spec
    };

    Node push(TapeNode n);
    TapeNode& at(Node n) { return tape_[static_cast<size_t>(n.idx)]; }
    void backward_one(TapeNode& n);

    std::deque<TapeNode> tape_;
};

inline const Matrix& Node::value() const { return graph->tape_[static_cast<size_t>(idx)].value; }
inline const Matrix& Node::grad() const { return graph->tape_[static_cast<size_t>(idx)].grad; }

} // namespace shad
