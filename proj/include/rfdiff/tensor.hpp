// rfdiff - RF heatmap generation toolkit
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "rfdiff/error.hpp"

namespace rfdiff {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape &s) {
    int64_t n = 1;
    for (int d : s)
        n *= d;
    return n;
}

inline std::string shape_str(const Shape &s) {
    std::string out = "(";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i)
            out += ",";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

// Dynamic define-by-run graph node. Values are 32-bit floats, row-major.
struct Node {
    Shape shape;
    std::vector<float> value;
    std::vector<float> grad; // sized lazily on first backward touch
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node &)> backprop; // scatters this->grad to parents
    const char *op = "leaf";

    int64_t numel() const { return int64_t(value.size()); }
    void ensure_grad() {
        if (grad.size() != value.size())
            grad.assign(value.size(), 0.0f);
    }
};

// Records nothing while a NoGradGuard is alive; forward values only.
inline bool &grad_mode_ref() {
    thread_local bool enabled = true;
    return enabled;
}

struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode_ref()) { grad_mode_ref() = false; }
    ~NoGradGuard() { grad_mode_ref() = prev; }
};

class Tensor {
public:
    Tensor() : node_(nullptr) {}
    explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Tensor zeros(const Shape &shape, bool requires_grad = false) {
        auto n = std::make_shared<Node>();
        n->shape = shape;
        n->value.assign(size_t(shape_numel(shape)), 0.0f);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }
    static Tensor full(const Shape &shape, float v, bool requires_grad = false) {
        Tensor t = zeros(shape, requires_grad);
        for (auto &x : t.value())
            x = v;
        return t;
    }
    static Tensor from_data(const Shape &shape, std::vector<float> data,
                            bool requires_grad = false) {
        if (int64_t(data.size()) != shape_numel(shape))
            throw ContractError("Tensor::from_data: got " + std::to_string(data.size()) +
                                " values for shape " + shape_str(shape));
        auto n = std::make_shared<Node>();
        n->shape = shape;
        n->value = std::move(data);
        n->requires_grad = requires_grad;
        return Tensor(n);
    }

    bool defined() const { return node_ != nullptr; }
    const Shape &shape() const { return node_->shape; }
    int64_t numel() const { return node_->numel(); }
    bool requires_grad() const { return node_->requires_grad; }

    std::vector<float> &value() { return node_->value; }
    const std::vector<float> &value() const { return node_->value; }
    std::vector<float> &grad() {
        node_->ensure_grad();
        return node_->grad;
    }
    const std::shared_ptr<Node> &node() const { return node_; }

    float item() const {
        if (numel() != 1)
            throw ContractError("Tensor::item: tensor has " + std::to_string(numel()) +
                                " elements");
        return node_->value[0];
    }

    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0f); }

    // Same values, no graph history.
    Tensor detach() const {
        auto n = std::make_shared<Node>();
        n->shape = node_->shape;
        n->value = node_->value;
        n->requires_grad = false;
        return Tensor(n);
    }

private:
    std::shared_ptr<Node> node_;
};

// Topologically ordered record of the operations reachable from a root;
// backward traverses it in exact reverse.
class Tape {
public:
    explicit Tape(const Tensor &root) {
        // Iterative post-order DFS over parents.
        std::unordered_set<Node *> visited;
        struct Frame {
            Node *n;
            size_t next_parent;
        };
        std::vector<Frame> stack;
        std::vector<std::shared_ptr<Node>> keep; // pins nodes while walking
        stack.push_back({root.node().get(), 0});
        keep.push_back(root.node());
        visited.insert(root.node().get());
        // Map raw -> shared for ordering storage
        while (!stack.empty()) {
            Frame &f = stack.back();
            if (f.next_parent < f.n->parents.size()) {
                Node *p = f.n->parents[f.next_parent].get();
                auto sp = f.n->parents[f.next_parent];
                ++f.next_parent;
                if (!visited.count(p)) {
                    visited.insert(p);
                    keep.push_back(sp);
                    stack.push_back({p, 0});
                }
            } else {
                order_.push_back(f.n);
                stack.pop_back();
            }
        }
        pinned_ = std::move(keep);
    }

    size_t size() const { return order_.size(); }

    // Runs all recorded backprop closures in reverse topological order.
    void backward_from(Node *root) {
        root->ensure_grad();
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node *n = *it;
            if (n == root || (n->backprop && n->requires_grad)) {
                if (n->backprop) {
                    n->ensure_grad();
                    n->backprop(*n);
                }
            }
        }
    }

private:
    std::vector<Node *> order_;
    std::vector<std::shared_ptr<Node>> pinned_;
};

// Reverse-mode gradients for every requires_grad leaf reachable from `loss`.
// Repeated calls without zero_grad accumulate.
inline void backward(const Tensor &loss) {
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got shape " +
                            shape_str(loss.shape()));
    if (!loss.requires_grad())
        throw ContractError("backward: loss does not require grad (no reachable leaves)");
    Tape tape(loss);
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0f;
    tape.backward_from(loss.node().get());
}

} // namespace rfdiff
