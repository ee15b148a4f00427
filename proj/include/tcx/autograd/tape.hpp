#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "tcx/autograd/array.hpp"

namespace tcx::ag {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;
};

/// Single-owner record of primitive applications. Values are immutable once
/// recorded; backward() replays the records in reverse order.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// A trainable leaf. Its gradient is available after backward().
    Var param(Array value) { return push(std::move(value), true, {}); }

    /// An untracked input; asking for its gradient is a contract error.
    Var constant(Array value) { return push(std::move(value), false, {}); }

    [[nodiscard]] const Array& value(Var v) const { return nodes_.at(v.id).value; }
    [[nodiscard]] bool tracked(Var v) const { return nodes_.at(v.id).needs_grad; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

    [[nodiscard]] const Array& grad(Var v) const {
        const Node& n = nodes_.at(v.id);
        if (!n.needs_grad) throw ContractError("gradient requested for an untracked value");
        if (!done_) throw ContractError("gradient requested before backward()");
        return n.grad;
    }

    /// Record the output of a primitive. `back` receives the output gradient and
    /// must accumulate into parents through `accumulate`.
    Var record(Array value, std::initializer_list<Var> parents, std::function<void(const Array&)> back) {
        if (!value.all_finite()) throw NumericError("non-finite value produced on tape");
        bool needs = false;
        for (Var p : parents) {
            if (p.tape != this) throw ContractError("operands recorded on different tapes");
            needs = needs || nodes_[p.id].needs_grad;
        }
        return push(std::move(value), needs, needs ? std::move(back) : nullptr);
    }

    /// Add `g` into the gradient buffer of `v` (no-op for untracked values).
    void accumulate(Var v, const Array& g) {
        Node& n = nodes_[v.id];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = Array(n.value.shape());
        n.grad += g;
    }

    /// Add g[i] into one element; used by primitives that scatter.
    double* grad_buffer(Var v) {
        Node& n = nodes_[v.id];
        if (!n.needs_grad) return nullptr;
        if (n.grad.size() == 0) n.grad = Array(n.value.shape());
        return n.grad.data();
    }

    void backward(Var loss) {
        if (loss.tape != this) throw ContractError("loss belongs to another tape");
        Node& root = nodes_.at(loss.id);
        if (root.value.size() != 1) throw ContractError("backward() needs a scalar loss");
        if (!root.needs_grad) throw ContractError("loss does not depend on any parameter");
        for (auto& n : nodes_)
            if (n.needs_grad) n.grad = Array(n.value.shape());
        root.grad[0] = 1.0;
        for (std::size_t i = loss.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (n.back) n.back(n.grad);
        }
        done_ = true;
    }

private:
    struct Node {
        Array value;
        Array grad;
        bool needs_grad = false;
        std::function<void(const Array&)> back;
    };

    Var push(Array value, bool needs, std::function<void(const Array&)> back) {
        nodes_.push_back(Node{std::move(value), Array{}, needs, std::move(back)});
        return Var{this, nodes_.size() - 1};
    }

    std::vector<Node> nodes_;
    bool done_ = false;
};

}  // namespace tcx::ag
