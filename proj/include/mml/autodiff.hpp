#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mml/errors.hpp"

namespace mml::ad {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
    Leaf,
    Const,
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Log,
    Tanh,
    Sigmoid,
    Relu,
    Pow,  // fixed real exponent in the payload
    Min,
    Max,
};

// Reverse-mode tape over scalar nodes. Append-only: every parent id is
// strictly smaller than its child's id, so insertion order is a topological
// order and one reverse sweep computes all gradients.
//
// Values are computed eagerly as nodes are appended (leaves carry their
// binding at creation), and forward() re-evaluates the whole tape after
// rebinding leaves. Gradients accumulate into pre-zeroed slots: callers must
// zero_grad() between backward passes on the same tape.
class Tape {
  public:
    Tape() = default;

    // --- construction ---------------------------------------------------

    // anonymous bound leaf
    NodeId leaf(double value);

    // named leaf; unbound until forward(bindings) or set_value provides it
    NodeId input(const std::string& name);

    NodeId constant(double value);

    NodeId add(NodeId a, NodeId b) { return append(Op::Add, a, b); }
    NodeId sub(NodeId a, NodeId b) { return append(Op::Sub, a, b); }
    NodeId mul(NodeId a, NodeId b) { return append(Op::Mul, a, b); }
    NodeId div(NodeId a, NodeId b) { return append(Op::Div, a, b); }
    NodeId neg(NodeId a) { return append(Op::Neg, a, a); }
    NodeId exp(NodeId a) { return append(Op::Exp, a, a); }
    NodeId log(NodeId a) { return append(Op::Log, a, a); }
    NodeId tanh(NodeId a) { return append(Op::Tanh, a, a); }
    NodeId sigmoid(NodeId a) { return append(Op::Sigmoid, a, a); }
    NodeId relu(NodeId a) { return append(Op::Relu, a, a); }
    NodeId pow(NodeId a, double exponent);
    NodeId min(NodeId a, NodeId b) { return append(Op::Min, a, b); }
    NodeId max(NodeId a, NodeId b) { return append(Op::Max, a, b); }

    // convenience: a*x + b with a,b plain doubles
    NodeId axpb(double a, NodeId x, double b);

    void mark_output(const std::string& name, NodeId id);

    // --- evaluation -------------------------------------------------------

    void set_value(NodeId leaf_id, double value);

    // re-evaluates every node in insertion order
    void forward();

    // binds named inputs, runs forward, returns named outputs
    std::map<std::string, double> forward(const std::map<std::string, double>& inputs);

    // reverse sweep from `output`; accumulates into grad slots.
    // StateError if any named input was never bound.
    void backward(NodeId output);

    void zero_grad();

    // gradients of the named leaves, by name
    std::map<std::string, double> named_gradients() const;

    double value(NodeId id) const { return value_[id]; }
    double grad(NodeId id) const { return grad_[id]; }
    std::size_t size() const { return op_.size(); }
    NodeId named_input(const std::string& name) const;

  private:
    NodeId append(Op op, NodeId a, NodeId b, double payload = 0.0);
    double eval(std::size_t i) const;

    std::vector<Op> op_;
    std::vector<NodeId> a_, b_;
    std::vector<double> payload_;
    std::vector<double> value_;
    std::vector<double> grad_;
    std::vector<std::pair<std::string, NodeId>> named_inputs_;
    std::vector<std::pair<std::string, NodeId>> named_outputs_;
    std::vector<NodeId> unbound_inputs_;
};

// Supported optimizers. Momentum 0 reduces bit-identically to plain SGD.
enum class OptimizerKind { Sgd, SgdMomentum };

class Optimizer {
  public:
    Optimizer(OptimizerKind kind, double learning_rate, double momentum = 0.0);

    void set_learning_rate(double lr) { lr_ = lr; }
    double learning_rate() const { return lr_; }

    // p <- p - lr*g, or with momentum: v <- mu*v + g, p <- p - lr*v.
    // ShapeError on length mismatch.
    void step(std::span<double> params, std::span<const double> grads);

  private:
    OptimizerKind kind_;
    double lr_;
    double momentum_;
    std::vector<double> velocity_;
};

// Max over inputs of |analytic - central difference| / (|central difference| + 1e-12).
// `build` declares named inputs on the tape and returns the output node.
double grad_check(const std::function<NodeId(Tape&)>& build,
                  const std::map<std::string, double>& point, double epsilon);

}  // namespace mml::ad
