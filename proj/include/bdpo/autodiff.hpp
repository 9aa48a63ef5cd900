#pragma once

#include <cmath>
#include <vector>

namespace bdpo {

// Minimal scalar reverse-mode tape. Loss expressions are built over a few
// leaves (the policy log-probabilities); backward() yields the adjoint of
// every leaf, which is then combined with the per-sequence parameter
// gradients. scale() multiplies by a constant that carries no gradient,
// which is how stop-gradient factors enter a differentiated expression.
class ScalarTape {
public:
    struct Var {
        int idx = -1;
    };

    Var leaf(double value) { return push(Op::kLeaf, value, -1, -1, 0.0); }
    Var constant(double value) { return push(Op::kConst, value, -1, -1, 0.0); }

    Var add(Var a, Var b) { return push(Op::kAdd, val(a) + val(b), a.idx, b.idx, 0.0); }
    Var sub(Var a, Var b) { return push(Op::kSub, val(a) - val(b), a.idx, b.idx, 0.0); }
    Var mul(Var a, Var b) { return push(Op::kMul, val(a) * val(b), a.idx, b.idx, 0.0); }
    Var neg(Var a) { return push(Op::kNeg, -val(a), a.idx, -1, 0.0); }
    Var scale(Var a, double c) { return push(Op::kScale, c * val(a), a.idx, -1, c); }
    Var exp_of(Var a) { return push(Op::kExp, std::exp(val(a)), a.idx, -1, 0.0); }
    // log sigma(x) = -softplus(-x), with the two-branch stable softplus.
    Var log_sigmoid(Var a) { return push(Op::kLogSigmoid, log_sigmoid_value(val(a)), a.idx, -1, 0.0); }

    double value(Var v) const { return nodes_[static_cast<size_t>(v.idx)].value; }

    // Seeds d(output)/d(output) = 1 and propagates adjoints to every node.
    void backward(Var output);
    double adjoint(Var v) const { return nodes_[static_cast<size_t>(v.idx)].adjoint; }

    static double log_sigmoid_value(double x) {
        // softplus(t) = log1p(exp(t)) for t <= 0, t + log1p(exp(-t)) otherwise
        const double t = -x;
        const double sp = t <= 0.0 ? std::log1p(std::exp(t)) : t + std::log1p(std::exp(-t));
        return -sp;
    }
    static double sigmoid_value(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

private:
    enum class Op { kLeaf, kConst, kAdd, kSub, kMul, kNeg, kScale, kExp, kLogSigmoid };
    struct Node {
        Op op;
        int a, b;
        double c;
        double value;
        double adjoint;
    };

    double val(Var v) const { return nodes_[static_cast<size_t>(v.idx)].value; }
    Var push(Op op, double value, int a, int b, double c) {
        nodes_.push_back(Node{op, a, b, c, value, 0.0});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
};

inline void ScalarTape::backward(Var output) {
    for (auto& n : nodes_) n.adjoint = 0.0;
    nodes_[static_cast<size_t>(output.idx)].adjoint = 1.0;
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
        const Node& n = nodes_[static_cast<size_t>(i)];
        const double d = n.adjoint;
        if (d == 0.0) continue;
        switch (n.op) {
            case Op::kLeaf:
            case Op::kConst:
                break;
            case Op::kAdd:
                nodes_[static_cast<size_t>(n.a)].adjoint += d;
                nodes_[static_cast<size_t>(n.b)].adjoint += d;
                break;
            case Op::kSub:
                nodes_[static_cast<size_t>(n.a)].adjoint += d;
                nodes_[static_cast<size_t>(n.b)].adjoint -= d;
                break;
            case Op::kMul:
                nodes_[static_cast<size_t>(n.a)].adjoint += d * nodes_[static_cast<size_t>(n.b)].value;
                nodes_[static_cast<size_t>(n.b)].adjoint += d * nodes_[static_cast<size_t>(n.a)].value;
                break;
            case Op::kNeg:
                nodes_[static_cast<size_t>(n.a)].adjoint -= d;
                break;
            case Op::kScale:
                nodes_[static_cast<size_t>(n.a)].adjoint += d * n.c;
                break;
            case Op::kExp:
                nodes_[static_cast<size_t>(n.a)].adjoint += d * n.value;
                break;
            case Op::kLogSigmoid:
                // d/dx log sigma(x) = sigma(-x)
                nodes_[static_cast<size_t>(n.a)].adjoint +=
                    d * sigmoid_value(-nodes_[static_cast<size_t>(n.a)].value);
                break;
        }
    }
}

}  // namespace bdpo
