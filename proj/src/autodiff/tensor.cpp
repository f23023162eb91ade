#include "dpdsr/autodiff/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace dpdsr::ad {

namespace {

std::atomic<std::uint64_t> g_sequence{1};
thread_local bool t_grad_enabled = true;

// Each training step builds and frees a graph of many mid-sized buffers.
// With glibc's defaults the freed memory goes back to the kernel and the
// next step pays a page fault per 4 KiB; keeping it in the heap removes
// that cost (about half the step time for the default model).
[[maybe_unused]] const bool g_heap_tuned = [] {
#if defined(__GLIBC__)
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
#endif
    return true;
}();

NodePtr new_node(Shape shape, Buffer value, bool requires_grad) {
    if (value.size() != numel_of(shape)) {
        throw ShapeError("tensor: data length " + std::to_string(value.size()) +
                         " does not match shape " + to_string(shape));
    }
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    node->seq = g_sequence.fetch_add(1, std::memory_order_relaxed);
    return node;
}

}  // namespace

std::size_t numel_of(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << ',';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

Node::~Node() {
    // Long recurrent chains would otherwise recurse once per node.
    std::vector<NodePtr> pending = std::move(inputs);
    while (!pending.empty()) {
        NodePtr n = std::move(pending.back());
        pending.pop_back();
        if (n && n.use_count() == 1) {
            for (auto& in : n->inputs) pending.push_back(std::move(in));
            n->inputs.clear();
        }
    }
}

Buffer& Node::ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto n = numel_of(shape);
    return Tensor(new_node(std::move(shape), Buffer(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto n = numel_of(shape);
    return Tensor(new_node(std::move(shape), Buffer(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    return Tensor(new_node(std::move(shape), Buffer(values.begin(), values.end()), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return Tensor(new_node(Shape{}, Buffer{value}, requires_grad));
}

double Tensor::item() const {
    if (numel() != 1) {
        throw ShapeError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
    }
    return node_->value[0];
}

std::vector<double> Tensor::grad() const {
    if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
    return std::vector<double>(node_->grad.begin(), node_->grad.end());
}

Tensor Tensor::detach() const {
    return Tensor(new_node(node_->shape, node_->value, false));
}

Tensor Tensor::clone(bool requires_grad) const {
    return Tensor(new_node(node_->shape, node_->value, requires_grad));
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

namespace {

template <class Range>
Tensor make_result_impl(const char* op, Shape shape, Buffer value,
                        const Range& inputs, BackwardFn backward) {
    bool track = false;
    if (t_grad_enabled) {
        for (const auto& t : inputs) {
            if (t.defined() && t.requires_grad()) {
                track = true;
                break;
            }
        }
    }
    auto node = new_node(std::move(shape), std::move(value), track);
    node->op = op;
    if (track) {
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) node->inputs.push_back(t.node_ptr());
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

}  // namespace

Tensor make_result(const char* op, Shape shape, Buffer value,
                   std::initializer_list<Tensor> inputs, BackwardFn backward) {
    return make_result_impl(op, std::move(shape), std::move(value), inputs, std::move(backward));
}

Tensor make_result(const char* op, Shape shape, Buffer value,
                   const std::vector<Tensor>& inputs, BackwardFn backward) {
    return make_result_impl(op, std::move(shape), std::move(value), inputs, std::move(backward));
}

Graph collect_graph(const Tensor& root) {
    Graph graph;
    if (!root.defined() || !root.requires_grad()) return graph;
    std::unordered_set<Node*> seen;
    std::vector<Node*> stack{root.node()};
    seen.insert(root.node());
    while (!stack.empty()) {
        Node* n = stack.back();
        stack.pop_back();
        graph.nodes.push_back(n);
        for (const auto& in : n->inputs) {
            if (in && in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
        }
    }
    std::sort(graph.nodes.begin(), graph.nodes.end(),
              [](const Node* a, const Node* b) { return a->seq < b->seq; });
    return graph;
}

void backward(const Tensor& root) {
    if (!root.defined()) throw std::invalid_argument("backward: undefined root");
    if (root.numel() != 1) {
        throw ShapeError("backward: root must be a scalar, got shape " + to_string(root.shape()));
    }
    if (!root.requires_grad()) return;
    Graph graph = collect_graph(root);
    root.node()->ensure_grad()[0] += 1.0;
    for (auto it = graph.nodes.rbegin(); it != graph.nodes.rend(); ++it) {
        Node* n = *it;
        if (n->grad.empty() || !n->backward) continue;
        n->backward(*n);
        if (!n->inputs.empty()) {
            n->grad.clear();
            n->grad.shrink_to_fit();
        }
    }
}

}  // namespace dpdsr::ad
