#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpdsr::ad {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Vectorised kernels choose their scalar/SIMD
/// split from the buffer address, so unaligned heap blocks would make the
/// rounding of a result depend on where the allocator happened to put it.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::size_t numel_of(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised when operand shapes are incompatible. The message names the
/// operator and the offending shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node&)>;

/// One record of the define-by-run tape. `seq` is drawn from a global
/// monotone counter, so every input has a smaller seq than its consumer.
struct Node {
    Shape shape;
    Buffer value;
    Buffer grad;  // empty until first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::uint64_t seq = 0;
    std::vector<NodePtr> inputs;
    BackwardFn backward;

    Node() = default;
    Node(const Node&) = delete;
    Node& operator=(const Node&) = delete;
    ~Node();

    Buffer& ensure_grad();
};

/// Handle to a tape node. Copies share the node.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor parameter(Shape shape, std::vector<double> values) {
        return from(std::move(shape), std::move(values), true);
    }

    bool defined() const { return node_ != nullptr; }
    explicit operator bool() const { return defined(); }

    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->value.size(); }

    std::span<const double> data() const { return node_->value; }
    std::span<double> mutable_data() { return node_->value; }
    double item() const;
    double operator[](std::size_t i) const { return node_->value[i]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient buffer; zeros when no gradient reached this tensor.
    std::vector<double> grad() const;
    Buffer& grad_buffer() { return node_->ensure_grad(); }
    void zero_grad() { node_->grad.clear(); }

    /// Same values, no history.
    Tensor detach() const;
    /// Deep copy of values as a new leaf.
    Tensor clone(bool requires_grad = false) const;

    Node* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }
    const char* op() const { return node_->op; }

private:
    NodePtr node_;
};

/// Thread-local switch: while disabled, operations record no history.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Build an operation result. History is recorded only when grad mode is on
/// and at least one input requires a gradient.
Tensor make_result(const char* op, Shape shape, Buffer value,
                   std::initializer_list<Tensor> inputs, BackwardFn backward);
Tensor make_result(const char* op, Shape shape, Buffer value,
                   const std::vector<Tensor>& inputs, BackwardFn backward);

/// Topologically ordered view of everything reachable from a root.
struct Graph {
    std::vector<Node*> nodes;  // ascending seq: inputs precede consumers
};

Graph collect_graph(const Tensor& root);

/// Reverse-mode sweep from a scalar root. Leaf gradients accumulate;
/// intermediate gradients are released once propagated.
void backward(const Tensor& root);

}  // namespace dpdsr::ad
