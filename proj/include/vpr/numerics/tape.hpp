#pragma once

#include <cstdint>
#include <vector>

#include "vpr/numerics/tensor.hpp"

namespace vpr {

// Define-by-run reverse-mode autodiff over Tensor. A Tape is built fresh for
// every training step; backward() runs one reverse sweep from a scalar loss.
// Node ids are indices into the tape and stay valid until clear().
class Tape {
  public:
    enum class Op : uint8_t {
        Leaf,
        MatMul,
        Add,       // same shape, or b rank-1 broadcast over rows of a
        Sub,       // same broadcast rule as Add
        Mul,       // elementwise, same shape
        Scale,     // a * p0
        AddConst,  // a + p0
        Tanh,
        Sigmoid,
        Softplus,
        Exp,
        LeakyRelu,  // slope p0 for negative inputs
        Clamp,      // [p0, p1], zero gradient outside the open interval
        Concat,     // along the last axis
        SliceCols,  // columns [p0, p1) of the last axis
        SumRows,    // [m,n] -> [m]
        SumAll,     // -> [1]
        MeanAll,    // -> [1]
        Where,      // (mask [m], a, b): row r of a where mask[r] != 0, else of b
    };

    int leaf(Tensor value, bool requires_grad = false);

    int matmul(int a, int b);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double k);
    int add_const(int a, double k);
    int tanh(int a);
    int sigmoid(int a);
    int softplus(int a);
    int exp(int a);
    int leaky_relu(int a, double slope = 0.01);
    int clamp(int a, double lo, double hi);
    int concat(int a, int b);
    int slice_cols(int a, int64_t lo, int64_t hi);
    int sum_rows(int a);
    int sum_all(int a);
    int mean_all(int a);
    int where(int mask, int a, int b);

    const Tensor& val(int id) const { return nodes_[static_cast<size_t>(id)].val; }
    double scalar_val(int id) const { return val(id).data[0]; }
    // Gradient of the last backward() target w.r.t. node id; zeros if the node
    // was not reached.
    Tensor grad_of(int id) const;

    void backward(int loss_id);
    void clear();
    size_t size() const { return nodes_.size(); }

  private:
    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        int c = -1;
        double p0 = 0.0, p1 = 0.0;
        Tensor val;
        Tensor grad;        // allocated lazily during backward
        bool requires_grad = false;
        bool has_grad = false;  // grad buffer seeded (reachability flag)
    };

    int push(Node n);
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
};

}  // namespace vpr
