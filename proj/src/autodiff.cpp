#include "mml/autodiff.hpp"

#include <cmath>
#include <limits>

namespace mml::ad {

namespace {
inline double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}
}  // namespace

NodeId Tape::leaf(double value) {
    const NodeId id = static_cast<NodeId>(op_.size());
    op_.push_back(Op::Leaf);
    a_.push_back(id);
    b_.push_back(id);
    payload_.push_back(0.0);
    value_.push_back(value);
    grad_.push_back(0.0);
    return id;
}

NodeId Tape::input(const std::string& name) {
    const NodeId id = leaf(std::numeric_limits<double>::quiet_NaN());
    named_inputs_.emplace_back(name, id);
    unbound_inputs_.push_back(id);
    return id;
}

NodeId Tape::constant(double value) {
    const NodeId id = static_cast<NodeId>(op_.size());
    op_.push_back(Op::Const);
    a_.push_back(id);
    b_.push_back(id);
    payload_.push_back(value);
    value_.push_back(value);
    grad_.push_back(0.0);
    return id;
}

NodeId Tape::pow(NodeId a, double exponent) {
    return append(Op::Pow, a, a, exponent);
}

NodeId Tape::axpb(double a, NodeId x, double b) {
    NodeId r = mul(constant(a), x);
    if (b != 0.0) r = add(r, constant(b));
    return r;
}

void Tape::mark_output(const std::string& name, NodeId id) {
    named_outputs_.emplace_back(name, id);
}

NodeId Tape::append(Op op, NodeId a, NodeId b, double payload) {
    if (a >= op_.size() || b >= op_.size())
        throw StateError("Tape: parent id out of range");
    const NodeId id = static_cast<NodeId>(op_.size());
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    payload_.push_back(payload);
    grad_.push_back(0.0);
    value_.push_back(0.0);
    value_[id] = eval(id);
    return id;
}

double Tape::eval(std::size_t i) const {
    const double x = value_[a_[i]];
    const double y = value_[b_[i]];
    switch (op_[i]) {
        case Op::Leaf:
        case Op::Const:
            return value_[i];
        case Op::Add:
            return x + y;
        case Op::Sub:
            return x - y;
        case Op::Mul:
            return x * y;
        case Op::Div:
            if (y == 0.0) throw DomainError("division by zero", i);
            return x / y;
        case Op::Neg:
            return -x;
        case Op::Exp:
            return std::exp(x);
        case Op::Log:
            if (x <= 0.0) throw DomainError("log of non-positive value", i);
            return std::log(x);
        case Op::Tanh:
            return std::tanh(x);
        case Op::Sigmoid:
            return stable_sigmoid(x);
        case Op::Relu:
            return x > 0.0 ? x : 0.0;
        case Op::Pow: {
            const double e = payload_[i];
            if (x < 0.0 && e != std::floor(e))
                throw DomainError("pow of negative base with non-integer exponent", i);
            return std::pow(x, e);
        }
        case Op::Min:
            return x < y ? x : y;
        case Op::Max:
            return x > y ? x : y;
    }
    throw StateError("Tape: unknown op");
}

void Tape::set_value(NodeId leaf_id, double value) {
    if (op_[leaf_id] != Op::Leaf)
        throw StateError("Tape::set_value: node is not a leaf");
    value_[leaf_id] = value;
    std::erase(unbound_inputs_, leaf_id);
}

void Tape::forward() {
    for (std::size_t i = 0; i < op_.size(); ++i) {
        if (op_[i] == Op::Leaf || op_[i] == Op::Const) continue;
        value_[i] = eval(i);
    }
}

std::map<std::string, double> Tape::forward(const std::map<std::string, double>& inputs) {
    for (const auto& [name, id] : named_inputs_) {
        auto it = inputs.find(name);
        if (it == inputs.end())
            throw StateError("Tape::forward: unbound input '" + name + "'");
        set_value(id, it->second);
    }
    forward();
    std::map<std::string, double> out;
    for (const auto& [name, id] : named_outputs_) out[name] = value_[id];
    return out;
}

void Tape::backward(NodeId output) {
    if (output >= op_.size()) throw StateError("Tape::backward: bad output id");
    if (!unbound_inputs_.empty())
        throw StateError("Tape::backward: forward has not run (unbound inputs)");
    grad_[output] += 1.0;
    for (std::size_t i = op_.size(); i-- > 0;) {
        const double g = grad_[i];
        if (g == 0.0) continue;
        const std::size_t pa = a_[i];
        const std::size_t pb = b_[i];
        const double x = value_[pa];
        const double y = value_[pb];
        switch (op_[i]) {
            case Op::Leaf:
            case Op::Const:
                break;
            case Op::Add:
                grad_[pa] += g;
                grad_[pb] += g;
                break;
            case Op::Sub:
                grad_[pa] += g;
                grad_[pb] -= g;
                break;
            case Op::Mul:
                grad_[pa] += g * y;
                grad_[pb] += g * x;
                break;
            case Op::Div:
                grad_[pa] += g / y;
                grad_[pb] -= g * x / (y * y);
                break;
            case Op::Neg:
                grad_[pa] -= g;
                break;
            case Op::Exp:
                grad_[pa] += g * value_[i];
                break;
            case Op::Log:
                grad_[pa] += g / x;
                break;
            case Op::Tanh:
                grad_[pa] += g * (1.0 - value_[i] * value_[i]);
                break;
            case Op::Sigmoid:
                grad_[pa] += g * value_[i] * (1.0 - value_[i]);
                break;
            case Op::Relu:
                // subgradient 0 at the kink
                if (x > 0.0) grad_[pa] += g;
                break;
            case Op::Pow:
                grad_[pa] += g * payload_[i] * std::pow(x, payload_[i] - 1.0);
                break;
            case Op::Min:
                // ties route to the first argument
                if (x <= y)
                    grad_[pa] += g;
                else
                    grad_[pb] += g;
                break;
            case Op::Max:
                if (x >= y)
                    grad_[pa] += g;
                else
                    grad_[pb] += g;
                break;
        }
    }
}

void Tape::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0);
}

std::map<std::string, double> Tape::named_gradients() const {
    std::map<std::string, double> out;
    for (const auto& [name, id] : named_inputs_) out[name] = grad_[id];
    return out;
}

NodeId Tape::named_input(const std::string& name) const {
    for (const auto& [n, id] : named_inputs_)
        if (n == name) return id;
    throw StateError("Tape: no input named '" + name + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double momentum)
    : kind_(kind), lr_(learning_rate), momentum_(momentum) {
    if (lr_ < 0.0) throw ConfigError("Optimizer: learning rate must be non-negative");
    if (momentum_ < 0.0 || momentum_ >= 1.0)
        throw ConfigError("Optimizer: momentum must be in [0, 1)");
}

void Optimizer::step(std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size())
        throw ShapeError("Optimizer::step: params/grads length mismatch");
    if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
        return;
    }
    if (velocity_.size() != params.size()) velocity_.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] + grads[i];
        params[i] -= lr_ * velocity_[i];
    }
}

double grad_check(const std::function<NodeId(Tape&)>& build,
                  const std::map<std::string, double>& point, double epsilon) {
    if (epsilon <= 0.0 || epsilon > 1e-2)
        throw ConfigError("grad_check: epsilon must be in (0, 1e-2]");
    Tape tape;
    const NodeId out = build(tape);
    tape.forward(point);
    tape.backward(out);
    const auto analytic = tape.named_gradients();

    double worst = 0.0;
    for (const auto& [name, g] : analytic) {
        auto plus = point;
        auto minus = point;
        plus[name] += epsilon;
        minus[name] -= epsilon;
        tape.forward(plus);
        const double f_plus = tape.value(out);
        tape.forward(minus);
        const double f_minus = tape.value(out);
        const double fd = (f_plus - f_minus) / (2.0 * epsilon);
        const double rel = std::abs(g - fd) / (std::abs(fd) + 1e-12);
        if (rel > worst) worst = rel;
    }
    return worst;
}

}  // namespace mml::ad
