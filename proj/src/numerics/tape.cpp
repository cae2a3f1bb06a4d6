#include "vpr/numerics/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace vpr {

namespace {

bool broadcast_rows(const Tensor& a, const Tensor& b) {
    // b is a rank-1 vector applied to every row of 2-D a.
    return a.rank() == 2 && b.rank() == 1 && b.shape[0] == a.shape[1];
}

}  // namespace

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.val = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

int Tape::matmul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != 2 || B.rank() != 2 || A.shape[1] != B.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes");
    int64_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
    Node n;
    n.op = Op::MatMul;
    n.a = a;
    n.b = b;
    n.val = Tensor::zeros({m, p});
    const double* pa = A.data.data();
    const double* pb = B.data.data();
    double* pc = n.val.data.data();
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* crow = pc + i * p;
        for (int64_t kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            const double* brow = pb + kk * p;
            for (int64_t j = 0; j < p; ++j) crow[j] += av * brow[j];
        }
    }
    return push(std::move(n));
}

int Tape::add(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    if (A.same_shape(B)) {
        n.val = A;
        for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] += B.data[i];
    } else if (broadcast_rows(A, B)) {
        n.val = A;
        int64_t cols = A.shape[1];
        for (int64_t r = 0; r < A.shape[0]; ++r)
            for (int64_t c = 0; c < cols; ++c) n.val.data[static_cast<size_t>(r * cols + c)] += B.data[static_cast<size_t>(c)];
    } else {
        throw std::invalid_argument("add: incompatible shapes");
    }
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    if (A.same_shape(B)) {
        n.val = A;
        for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] -= B.data[i];
    } else if (broadcast_rows(A, B)) {
        n.val = A;
        int64_t cols = A.shape[1];
        for (int64_t r = 0; r < A.shape[0]; ++r)
            for (int64_t c = 0; c < cols; ++c) n.val.data[static_cast<size_t>(r * cols + c)] -= B.data[static_cast<size_t>(c)];
    } else {
        throw std::invalid_argument("sub: incompatible shapes");
    }
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.val = A;
    for (size_t i = 0; i < n.val.data.size(); ++i) n.val.data[i] *= B.data[i];
    return push(std::move(n));
}

int Tape::scale(int a, double k) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.p0 = k;
    n.val = val(a);
    for (double& v : n.val.data) v *= k;
    return push(std::move(n));
}

int Tape::add_const(int a, double k) {
    Node n;
    n.op = Op::AddConst;
    n.a = a;
    n.p0 = k;
    n.val = val(a);
    for (double& v : n.val.data) v += k;
    return push(std::move(n));
}

int Tape::tanh(int a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.val = val(a);
    for (double& v : n.val.data) v = std::tanh(v);
    return push(std::move(n));
}

int Tape::sigmoid(int a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = a;
    n.val = val(a);
    for (double& v : n.val.data) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(n));
}

int Tape::softplus(int a) {
    Node n;
    n.op = Op::Softplus;
    n.a = a;
    n.val = val(a);
    // log(1 + e^x), stable for large |x|.
    for (double& v : n.val.data) v = v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    return push(std::move(n));
}

int Tape::exp(int a) {
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.val = val(a);
    for (double& v : n.val.data) v = std::exp(v);
    return push(std::move(n));
}

int Tape::leaky_relu(int a, double slope) {
    Node n;
    n.op = Op::LeakyRelu;
    n.a = a;
    n.p0 = slope;
    n.val = val(a);
    for (double& v : n.val.data)
        if (v < 0.0) v *= slope;
    return push(std::move(n));
}

int Tape::clamp(int a, double lo, double hi) {
    Node n;
    n.op = Op::Clamp;
    n.a = a;
    n.p0 = lo;
    n.p1 = hi;
    n.val = val(a);
    for (double& v : n.val.data) v = v < lo ? lo : (v > hi ? hi : v);
    return push(std::move(n));
}

int Tape::concat(int a, int b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.rank() != B.rank()) throw std::invalid_argument("concat: rank mismatch");
    Node n;
    n.op = Op::Concat;
    n.a = a;
    n.b = b;
    if (A.rank() == 1) {
        n.val = Tensor::zeros({A.shape[0] + B.shape[0]});
        std::copy(A.data.begin(), A.data.end(), n.val.data.begin());
        std::copy(B.data.begin(), B.data.end(), n.val.data.begin() + A.size());
    } else if (A.rank() == 2 && A.shape[0] == B.shape[0]) {
        int64_t m = A.shape[0], ca = A.shape[1], cb = B.shape[1];
        n.val = Tensor::zeros({m, ca + cb});
        for (int64_t r = 0; r < m; ++r) {
            std::copy(A.data.begin() + r * ca, A.data.begin() + (r + 1) * ca,
                      n.val.data.begin() + r * (ca + cb));
            std::copy(B.data.begin() + r * cb, B.data.begin() + (r + 1) * cb,
                      n.val.data.begin() + r * (ca + cb) + ca);
        }
    } else {
        throw std::invalid_argument("concat: incompatible shapes");
    }
    return push(std::move(n));
}

int Tape::slice_cols(int a, int64_t lo, int64_t hi) {
    const Tensor& A = val(a);
    int64_t cols = A.cols();
    if (lo < 0 || hi > cols || lo >= hi) throw std::invalid_argument("slice_cols: bad range");
    Node n;
    n.op = Op::SliceCols;
    n.a = a;
    n.p0 = static_cast<double>(lo);
    n.p1 = static_cast<double>(hi);
    int64_t w = hi - lo;
    if (A.rank() == 1) {
        n.val = Tensor::zeros({w});
        std::copy(A.data.begin() + lo, A.data.begin() + hi, n.val.data.begin());
    } else {
        int64_t m = A.shape[0];
        n.val = Tensor::zeros({m, w});
        for (int64_t r = 0; r < m; ++r)
            std::copy(A.data.begin() + r * cols + lo, A.data.begin() + r * cols + hi,
                      n.val.data.begin() + r * w);
    }
    return push(std::move(n));
}

int Tape::sum_rows(int a) {
    const Tensor& A = val(a);
    if (A.rank() != 2) throw std::invalid_argument("sum_rows: need rank 2");
    Node n;
    n.op = Op::SumRows;
    n.a = a;
    int64_t m = A.shape[0], c = A.shape[1];
    n.val = Tensor::zeros({m});
    for (int64_t r = 0; r < m; ++r) {
        double s = 0.0;
        for (int64_t j = 0; j < c; ++j) s += A.data[static_cast<size_t>(r * c + j)];
        n.val.data[static_cast<size_t>(r)] = s;
    }
    return push(std::move(n));
}

int Tape::sum_all(int a) {
    Node n;
    n.op = Op::SumAll;
    n.a = a;
    double s = 0.0;
    for (double v : val(a).data) s += v;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

int Tape::mean_all(int a) {
    Node n;
    n.op = Op::MeanAll;
    n.a = a;
    double s = 0.0;
    for (double v : val(a).data) s += v;
    n.val = Tensor::scalar(s / static_cast<double>(val(a).size()));
    return push(std::move(n));
}

int Tape::where(int mask, int a, int b) {
    const Tensor& M = val(mask);
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B)) throw std::invalid_argument("where: branch shape mismatch");
    if (M.rank() != 1 || M.shape[0] != A.rows()) throw std::invalid_argument("where: mask shape");
    Node n;
    n.op = Op::Where;
    n.a = a;
    n.b = b;
    n.c = mask;
    n.val = A;
    int64_t c = A.cols();
    for (int64_t r = 0; r < A.rows(); ++r)
        if (M.data[static_cast<size_t>(r)] == 0.0)
            for (int64_t j = 0; j < c; ++j)
                n.val.data[static_cast<size_t>(r * c + j)] = B.data[static_cast<size_t>(r * c + j)];
    return push(std::move(n));
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.has_grad) {
        n.grad = Tensor::zeros(n.val.shape);
        n.has_grad = true;
    }
    return n.grad;
}

Tensor Tape::grad_of(int id) const {
    const Node& n = nodes_[static_cast<size_t>(id)];
    return n.has_grad ? n.grad : Tensor::zeros(n.val.shape);
}

void Tape::backward(int loss_id) {
    if (val(loss_id).size() != 1) throw std::invalid_argument("backward: loss must be scalar");
    for (Node& n : nodes_) n.has_grad = false;
    grad_buf(loss_id).data[0] = 1.0;

    for (int id = loss_id; id >= 0; --id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.has_grad || n.op == Op::Leaf) continue;
        const Tensor& g = n.grad;
        switch (n.op) {
            case Op::MatMul: {
                const Tensor& A = val(n.a);
                const Tensor& B = val(n.b);
                int64_t m = A.shape[0], k = A.shape[1], p = B.shape[1];
                {
                    Tensor& ga = grad_buf(n.a);
                    // dA = g * B^T
                    for (int64_t i = 0; i < m; ++i)
                        for (int64_t j = 0; j < p; ++j) {
                            double gv = g.data[static_cast<size_t>(i * p + j)];
                            if (gv == 0.0) continue;
                            const double* brow = B.data.data() + j;
                            double* garow = ga.data.data() + i * k;
                            for (int64_t kk = 0; kk < k; ++kk) garow[kk] += gv * brow[kk * p];
                        }
                }
                {
                    Tensor& gb = grad_buf(n.b);
                    // dB = A^T * g
                    for (int64_t i = 0; i < m; ++i) {
                        const double* arow = A.data.data() + i * k;
                        const double* grow = g.data.data() + i * p;
                        for (int64_t kk = 0; kk < k; ++kk) {
                            double av = arow[kk];
                            if (av == 0.0) continue;
                            double* gbrow = gb.data.data() + kk * p;
                            for (int64_t j = 0; j < p; ++j) gbrow[j] += av * grow[j];
                        }
                    }
                }
                break;
            }
            case Op::Add:
            case Op::Sub: {
                double sgn = n.op == Op::Sub ? -1.0 : 1.0;
                {
                    Tensor& ga = grad_buf(n.a);
                    for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                }
                const Tensor& B = val(n.b);
                Tensor& gb = grad_buf(n.b);
                if (B.same_shape(n.val)) {
                    for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += sgn * g.data[i];
                } else {
                    int64_t m = n.val.shape[0], c = n.val.shape[1];
                    for (int64_t r = 0; r < m; ++r)
                        for (int64_t j = 0; j < c; ++j)
                            gb.data[static_cast<size_t>(j)] += sgn * g.data[static_cast<size_t>(r * c + j)];
                }
                break;
            }
            case Op::Mul: {
                const Tensor& A = val(n.a);
                const Tensor& B = val(n.b);
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * B.data[i];
                Tensor& gb = grad_buf(n.b);
                for (size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * A.data[i];
                break;
            }
            case Op::Scale: {
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.p0;
                break;
            }
            case Op::AddConst: {
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i];
                break;
            }
            case Op::Tanh: {
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * (1.0 - n.val.data[i] * n.val.data[i]);
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * n.val.data[i] * (1.0 - n.val.data[i]);
                break;
            }
            case Op::Softplus: {
                const Tensor& A = val(n.a);
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] / (1.0 + std::exp(-A.data[i]));
                break;
            }
            case Op::Exp: {
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * n.val.data[i];
                break;
            }
            case Op::LeakyRelu: {
                const Tensor& A = val(n.a);
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i)
                    ga.data[i] += g.data[i] * (A.data[i] < 0.0 ? n.p0 : 1.0);
                break;
            }
            case Op::Clamp: {
                const Tensor& A = val(n.a);
                Tensor& ga = grad_buf(n.a);
                for (size_t i = 0; i < g.data.size(); ++i)
                    if (A.data[i] > n.p0 && A.data[i] < n.p1) ga.data[i] += g.data[i];
                break;
            }
            case Op::Concat: {
                const Tensor& A = val(n.a);
                const Tensor& B = val(n.b);
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                if (A.rank() == 1) {
                    for (int64_t i = 0; i < A.size(); ++i) ga.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                    for (int64_t i = 0; i < B.size(); ++i)
                        gb.data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(A.size() + i)];
                } else {
                    int64_t m = A.shape[0], ca = A.shape[1], cb = B.shape[1];
                    for (int64_t r = 0; r < m; ++r) {
                        for (int64_t j = 0; j < ca; ++j)
                            ga.data[static_cast<size_t>(r * ca + j)] += g.data[static_cast<size_t>(r * (ca + cb) + j)];
                        for (int64_t j = 0; j < cb; ++j)
                            gb.data[static_cast<size_t>(r * cb + j)] += g.data[static_cast<size_t>(r * (ca + cb) + ca + j)];
                    }
                }
                break;
            }
            case Op::SliceCols: {
                const Tensor& A = val(n.a);
                Tensor& ga = grad_buf(n.a);
                int64_t lo = static_cast<int64_t>(n.p0), hi = static_cast<int64_t>(n.p1);
                int64_t w = hi - lo, cols = A.cols();
                for (int64_t r = 0; r < A.rows(); ++r)
                    for (int64_t j = 0; j < w; ++j)
                        ga.data[static_cast<size_t>(r * cols + lo + j)] += g.data[static_cast<size_t>(r * w + j)];
                break;
            }
            case Op::SumRows: {
                const Tensor& A = val(n.a);
                Tensor& ga = grad_buf(n.a);
                int64_t m = A.shape[0], c = A.shape[1];
                for (int64_t r = 0; r < m; ++r)
                    for (int64_t j = 0; j < c; ++j)
                        ga.data[static_cast<size_t>(r * c + j)] += g.data[static_cast<size_t>(r)];
                break;
            }
            case Op::SumAll: {
                Tensor& ga = grad_buf(n.a);
                for (double& v : ga.data) v += g.data[0];
                break;
            }
            case Op::MeanAll: {
                Tensor& ga = grad_buf(n.a);
                double k = g.data[0] / static_cast<double>(ga.size());
                for (double& v : ga.data) v += k;
                break;
            }
            case Op::Where: {
                const Tensor& M = val(n.c);
                Tensor& ga = grad_buf(n.a);
                Tensor& gb = grad_buf(n.b);
                int64_t c = n.val.cols();
                for (int64_t r = 0; r < n.val.rows(); ++r) {
                    bool take_a = M.data[static_cast<size_t>(r)] != 0.0;
                    for (int64_t j = 0; j < c; ++j) {
                        size_t idx = static_cast<size_t>(r * c + j);
                        if (take_a)
                            ga.data[idx] += g.data[idx];
                        else
                            gb.data[idx] += g.data[idx];
                    }
                }
                break;
            }
            case Op::Leaf:
                break;
        }
    }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace vpr
