#include "c2v/nn/tensor.hpp"

#include <unordered_set>

#include "c2v/common/error.hpp"

namespace c2v::nn {

namespace {
thread_local bool g_grad_enabled = true;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) {
    if (d < 0) throw ShapeMismatch("negative dimension in " + shape_string(s));
    n *= d;
  }
  return n;
}

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value.assign(static_cast<std::size_t>(numel(shape)), value);
  n->shape = std::move(shape);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> data, bool requires_grad) {
  if (static_cast<std::int64_t>(data.size()) != numel(shape)) {
    throw ShapeMismatch("tensor data size " + std::to_string(data.size()) + " does not match shape " +
                        shape_string(shape));
  }
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  return from(shape(), node_->value, node_->requires_grad);
}

template <class T>
void Tensor<T>::backward() {
  if (!node_) throw UsageError("backward on an undefined tensor");
  if (node_->backward_done) throw UsageError("backward called twice without a new forward pass");
  if (node_->value.size() != 1) throw UsageError("backward needs a scalar, got " + shape_string(shape()));
  if (!node_->requires_grad) throw UsageError("backward on a tensor that does not require a gradient");

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
  }
  for (Node<T>* n : order) {
    if (n->backward_fn) {
      n->backward_fn = nullptr;
      n->parents.clear();
    }
  }
  node_->backward_done = true;
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<Tensor<T>> parents) {
  auto n = std::make_shared<Node<T>>();
  n->value.assign(static_cast<std::size_t>(numel(shape)), T(0));
  n->shape = std::move(shape);
  if (g_grad_enabled) {
    for (const auto& p : parents) {
      if (p.defined() && p.requires_grad()) n->requires_grad = true;
    }
  }
  if (n->requires_grad) {
    for (auto& p : parents) {
      if (p.defined()) n->parents.push_back(p.ptr());
    }
  }
  return Tensor<T>(std::move(n));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result<float>(Shape, std::vector<Tensor<float>>);
template Tensor<double> make_result<double>(Shape, std::vector<Tensor<double>>);

}  // namespace c2v::nn
