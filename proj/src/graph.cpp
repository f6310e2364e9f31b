#include "shad/graph.hpp"

#include <cmath>
#include <stdexcept>

#include "shad/kernels.hpp"

namespace shad {

namespace {
const kernels::KernelTable& K() { return kernels::active(); }

void check_finite(const Matrix& m, const char* op) {
    if (!m.all_finite())
        throw std::runtime_error(std::string(op) + ": non-finite result");
}
} // namespace

Node Graph::push(TapeNode n) {
    n.grad = Matrix(n.value.rows(), n.value.cols());
    tape_.push_back(std::move(n));
    return Node{this, static_cast<int>(tape_.size()) - 1};
}

Node Graph::constant(Matrix value) {
    TapeNode n;
    n.op = Op::leaf;
    n.value = std::move(value);
    return push(std::move(n));
}

Node Graph::param(Param& p) {
    TapeNode n;
    n.op = Op::leaf;
    n.value = p.value;
    n.bound = &p;
    return push(std::move(n));
}

Node Graph::matmul(Node a, Node b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (av.cols() != bv.rows()) throw_shape_error("matmul", av, bv);
    TapeNode n;
    n.op = Op::matmul;
    n.a = a.idx;
    n.b = b.idx;
    n.value = Matrix(av.rows(), bv.cols());
    K().matmul_nn(n.value.data(), av.data(), bv.data(), av.rows(), av.cols(), bv.cols());
    check_finite(n.value, "matmul");
    return push(std::move(n));
}

Node Graph::rowwise_affine(Node x, Node gamma, Node beta) {
    const Matrix& xv = x.value();
    const Matrix& gv = gamma.value();
    const Matrix& bv = beta.value();
    if (gv.rows() != 1 || bv.rows() != 1 || gv.cols() != xv.cols() || bv.cols() != xv.cols())
        throw_shape_error("rowwise_affine: x " + xv.shape_str() + ", gamma " + gv.shape_str() +
                          ", beta " + bv.shape_str());
    TapeNode n;
    n.op = Op::rowwise_affine;
    n.a = x.idx;
    n.b = gamma.idx;
    n.c = beta.idx;
    n.value = Matrix(xv.rows(), xv.cols());
    const int d = xv.cols();
    for (int i = 0; i < xv.rows(); ++i) {
        double* out = n.value.row(i);
        K().mul(out, xv.row(i), gv.data(), d);
        K().add(out, out, bv.data(), d);
    }
    check_finite(n.value, "rowwise_affine");
    return push(std::move(n));
}

Node Graph::log_softmax(Node x) {
    const Matrix& xv = x.value();
    if (xv.cols() < 2) throw_shape_error("log_softmax: needs >= 2 columns, got " + xv.shape_str());
    TapeNode n;
    n.op = Op::log_softmax;
    n.a = x.idx;
    n.value = Matrix(xv.rows(), xv.cols());
    const int c = xv.cols();
    for (int i = 0; i < xv.rows(); ++i) {
        const double* in = xv.row(i);
        double* out = n.value.row(i);
        const double m = K().max(in, c);
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(in[j] - m);
        const double lse = m + std::log(z);
        for (int j = 0; j < c; ++j) out[j] = in[j] - lse;
    }
    check_finite(n.value, "log_softmax");
    return push(std::move(n));
}

Node Graph::add(Node a, Node b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (!av.same_shape(bv)) throw_shape_error("add", av, bv);
    TapeNode n;
    n.op = Op::add;
    n.a = a.idx;
    n.b = b.idx;
    n.value = Matrix(av.rows(), av.cols());
    K().add(n.value.data(), av.data(), bv.data(), av.size());
    check_finite(n.value, "add");
    return push(std::move(n));
}

Node Graph::sub(Node a, Node b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (!av.same_shape(bv)) throw_shape_error("sub", av, bv);
    TapeNode n;
    n.op = Op::sub;
    n.a = a.idx;
    n.b = b.idx;
    n.value = Matrix(av.rows(), av.cols());
    K().sub(n.value.data(), av.data(), bv.data(), av.size());
    check_finite(n.value, "sub");
    return push(std::move(n));
}

Node Graph::mul(Node a, Node b) {
    const Matrix& av = a.value();
    const Matrix& bv = b.value();
    if (!av.same_shape(bv)) throw_shape_error("mul", av, bv);
    TapeNode n;
    n.op = Op::mul;
    n.a = a.idx;
    n.b = b.idx;
    n.value = Matrix(av.rows(), av.cols());
    K().mul(n.value.data(), av.data(), bv.data(), av.size());
    check_finite(n.value, "mul");
    return push(std::move(n));
}

Node Graph::relu(Node x) {
    const Matrix& xv = x.value();
    TapeNode n;
    n.op = Op::relu;
    n.a = x.idx;
    n.value = Matrix(xv.rows(), xv.cols());
    K().relu(n.value.data(), xv.data(), xv.size());
    return push(std::move(n));
}

Node Graph::mean_rows(Node x) {
    const Matrix& xv = x.value();
    if (xv.rows() < 1) throw_shape_error("mean_rows: empty input");
    TapeNode n;
    n.op = Op::mean_rows;
    n.a = x.idx;
    n.value = Matrix(1, xv.cols());
    for (int i = 0; i < xv.rows(); ++i)
        K().axpy(n.value.data(), 1.0 / xv.rows(), xv.row(i), xv.cols());
    check_finite(n.value, "mean_rows");
    return push(std::move(n));
}

Node Graph::scale(Node x, double a) {
    const Matrix& xv = x.value();
    TapeNode n;
    n.op = Op::scale;
    n.a = x.idx;
    n.alpha = a;
    n.value = Matrix(xv.rows(), xv.cols());
    K().scale(n.value.data(), xv.data(), a, xv.size());
    check_finite(n.value, "scale");
    return push(std::move(n));
}

Node Graph::exp(Node x) {
    const Matrix& xv = x.value();
    TapeNode n;
    n.op = Op::exp_;
    n.a = x.idx;
    n.value = Matrix(xv.rows(), xv.cols());
    for (int i = 0; i < xv.size(); ++i) n.value.at_flat(i) = std::exp(xv.at_flat(i));
    check_finite(n.value, "exp");
    return push(std::move(n));
}

Node Graph::log(Node x) {
    const Matrix& xv = x.value();
    TapeNode n;
    n.op = Op::log_;
    n.a = x.idx;
    n.value = Matrix(xv.rows(), xv.cols());
    for (int i = 0; i < xv.size(); ++i)
        n.value.at_flat(i) = std::log(xv.at_flat(i) > kLogFloor ? xv.at_flat(i) : kLogFloor);
    check_finite(n.value, "log");
    return push(std::move(n));
}

Node Graph::reduce_sum(Node x) {
    const Matrix& xv = x.value();
    TapeNode n;
    n.op = Op::reduce_sum;
    n.a = x.idx;
    n.value = Matrix(1, 1);
    n.value(0, 0) = K().sum(xv.data(), xv.size());
    check_finite(n.value, "reduce_sum");
    return push(std::move(n));
}

Node Graph::slice_cols(Node x, int start, int len) {
    const Matrix& xv = x.value();
    if (start < 0 || len < 1 || start + len > xv.cols())
        throw_shape_error("slice_cols: [" + std::to_string(start) + ", " +
                          std::to_string(start + len) + ") out of range for " + xv.shape_str());
    TapeNode n;
    n.op = Op::slice_cols;
    n.a = x.idx;
    n.i0 = start;
    n.i1 = len;
    n.value = Matrix(xv.rows(), len);
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < len; ++j) n.value(i, j) = xv(i, start + j);
    return push(std::move(n));
}

Node Graph::reshape(Node x, int rows, int cols) {
    const Matrix& xv = x.value();
    if (rows * cols != xv.size())
        throw_shape_error("reshape: " + xv.shape_str() + " to " + std::to_string(rows) + "x" +
                          std::to_string(cols));
    TapeNode n;
    n.op = Op::reshape;
    n.a = x.idx;
    n.value = Matrix(rows, cols);
    for (int i = 0; i < xv.size(); ++i) n.value.at_flat(i) = xv.at_flat(i);
    return push(std::move(n));
}

Node Graph::standardize(Node x, StandardizeSpec spec) {
    const Matrix& xv = x.value();
    const int d = xv.cols();
    if (spec.center.cols() != d || spec.inv_std.cols() != d || spec.batch_mean.cols() != d ||
        spec.mean_active.cols() != d || spec.var_active.cols() != d)
        throw_shape_error("standardize: spec width mismatch with " + xv.shape_str());
    TapeNode n;
    n.op = Op::standardize;
    n.a = x.idx;
    n.value = Matrix(xv.rows(), d);
    for (int i = 0; i < xv.rows(); ++i)
        for (int j = 0; j < d; ++j)
            n.value(i, j) = (xv(i, j) - spec.center.at_flat(j)) * spec.inv_std.at_flat(j);
    check_finite(n.value, "standardize");
    n.aux = {std::move(spec.center), std::move(spec.inv_std), std::move(spec.batch_mean),
             std::move(spec.mean_active), std::move(spec.var_active)};
    return push(std::move(n));
}

void Graph::backward(Node root) {
    if (root.graph != this) throw std::logic_error("backward: node from another graph");
    TapeNode& r = at(root);
    if (r.value.rows() != 1 || r.value.cols() != 1)
        throw_shape_error("backward: root must be 1x1, got " + r.value.shape_str());

    // Reachability: parents always precede children on the tape, so one
    // reverse sweep visits each reachable node exactly once.
    std::vector<uint8_t> reachable(tape_.size(), 0);
    reachable[static_cast<size_t>(root.idx)] = 1;
    r.grad(0, 0) = 1.0;
    for (int i = root.idx; i >= 0; --i) {
        if (!reachable[static_cast<size_t>(i)]) continue;
        TapeNode& n = tape_[static_cast<size_t>(i)];
        for (int p : {n.a, n.b, n.c})
            if (p >= 0) reachable[static_cast<size_t>(p)] = 1;
        backward_one(n);
    }
}

void Graph::backward_one(TapeNode& n) {
    const Matrix& g = n.grad;
    switch (n.op) {
    case Op::leaf:
        if (n.bound) {
            if (!n.bound->grad.same_shape(g)) throw_shape_error("param grad", n.bound->grad, g);
            K().add(n.bound->grad.data(), n.bound->grad.data(), g.data(), g.size());
        }
        break;
    case Op::matmul: {
        TapeNode& a = tape_[static_cast<size_t>(n.a)];
        TapeNode& b = tape_[static_cast<size_t>(n.b)];
        const int nn = a.value.rows(), kk = a.value.cols(), mm = b.value.cols();
        // dA += g * B^T ; dB += A^T * g
        K().matmul_nt(a.grad.data(), g.data(), b.value.data(), nn, mm, kk);
        K().matmul_tn(b.grad.data(), a.value.data(), g.data(), kk, nn, mm);
        break;
    }
    case Op::rowwise_affine: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        TapeNode& ga = tape_[static_cast<size_t>(n.b)];
        TapeNode& be = tape_[static_cast<size_t>(n.c)];
        const int d = x.value.cols();
        for (int i = 0; i < x.value.rows(); ++i) {
            K().mul_accum(x.grad.row(i), g.row(i), ga.value.data(), d);
            K().mul_accum(ga.grad.data(), g.row(i), x.value.row(i), d);
            K().add(be.grad.data(), be.grad.data(), g.row(i), d);
        }
        break;
    }
    case Op::log_softmax: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        const int c = n.value.cols();
        for (int i = 0; i < n.value.rows(); ++i) {
            const double gs = K().sum(g.row(i), c);
            const double* out = n.value.row(i);
            double* dx = x.grad.row(i);
            const double* gi = g.row(i);
            for (int j = 0; j < c; ++j) dx[j] += gi[j] - std::exp(out[j]) * gs;
        }
        break;
    }
    case Op::add: {
        TapeNode& a = tape_[static_cast<size_t>(n.a)];
        TapeNode& b = tape_[static_cast<size_t>(n.b)];
        K().add(a.grad.data(), a.grad.data(), g.data(), g.size());
        K().add(b.grad.data(), b.grad.data(), g.data(), g.size());
        break;
    }
    case Op::sub: {
        TapeNode& a = tape_[static_cast<size_t>(n.a)];
        TapeNode& b = tape_[static_cast<size_t>(n.b)];
        K().add(a.grad.data(), a.grad.data(), g.data(), g.size());
        K().axpy(b.grad.data(), -1.0, g.data(), g.size());
        break;
    }
    case Op::mul: {
        TapeNode& a = tape_[static_cast<size_t>(n.a)];
        TapeNode& b = tape_[static_cast<size_t>(n.b)];
        K().mul_accum(a.grad.data(), g.data(), b.value.data(), g.size());
        K().mul_accum(b.grad.data(), g.data(), a.value.data(), g.size());
        break;
    }
    case Op::relu: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        K().relu_grad(x.grad.data(), x.value.data(), g.data(), g.size());
        break;
    }
    case Op::mean_rows: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        const double inv = 1.0 / x.value.rows();
        for (int i = 0; i < x.value.rows(); ++i)
            K().axpy(x.grad.row(i), inv, g.data(), g.size());
        break;
    }
    case Op::scale: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        K().axpy(x.grad.data(), n.alpha, g.data(), g.size());
        break;
    }
    case Op::exp_: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        K().mul_accum(x.grad.data(), g.data(), n.value.data(), g.size());
        break;
    }
    case Op::log_: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        for (int i = 0; i < g.size(); ++i) {
            const double xi = x.value.at_flat(i);
            if (xi > kLogFloor) x.grad.at_flat(i) += g.at_flat(i) / xi;
        }
        break;
    }
    case Op::reduce_sum: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        const double s = g(0, 0);
        for (int i = 0; i < x.grad.size(); ++i) x.grad.at_flat(i) += s;
        break;
    }
    case Op::slice_cols: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        for (int i = 0; i < g.rows(); ++i)
            for (int j = 0; j < g.cols(); ++j) x.grad(i, n.i0 + j) += g(i, j);
        break;
    }
    case Op::reshape: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        K().add(x.grad.data(), x.grad.data(), g.data(), g.size());
        break;
    }
    case Op::standardize: {
        TapeNode& x = tape_[static_cast<size_t>(n.a)];
        const Matrix& center = n.aux[0];
        const Matrix& inv_std = n.aux[1];
        const Matrix& batch_mean = n.aux[2];
        const Matrix& mean_active = n.aux[3];
        const Matrix& var_active = n.aux[4];
        const int rows = x.value.rows();
        const int d = x.value.cols();
        // Per channel j:
        //   dx_i = inv * (g_i - mean_act * gbar
        //                 - var_act * (x_i - mu_b) * inv^2 * (1/n) * sum_r g_r (x_r - center))
        std::vector<double> gbar(static_cast<size_t>(d), 0.0);
        std::vector<double> gx(static_cast<size_t>(d), 0.0);
        for (int i = 0; i < rows; ++i) {
            const double* gi = g.row(i);
            const double* xi = x.value.row(i);
            for (int j = 0; j < d; ++j) {
                gbar[static_cast<size_t>(j)] += gi[j];
                gx[static_cast<size_t>(j)] += gi[j] * (xi[j] - center.at_flat(j));
            }
        }
        for (int j = 0; j < d; ++j) {
            gbar[static_cast<size_t>(j)] /= rows;
            gx[static_cast<size_t>(j)] /= rows;
        }
        for (int i = 0; i < rows; ++i) {
            const double* gi = g.row(i);
            const double* xi = x.value.row(i);
            double* dx = x.grad.row(i);
            for (int j = 0; j < d; ++j) {
                const double inv = inv_std.at_flat(j);
                double t = gi[j];
                if (mean_active.at_flat(j) != 0.0) t -= gbar[static_cast<size_t>(j)];
                if (var_active.at_flat(j) != 0.0)
                    t -= (xi[j] - batch_mean.at_flat(j)) * inv * inv * gx[static_cast<size_t>(j)];
                dx[j] += inv * t;
            }
        }
        break;
    }
    }
}

} // namespace shad
