#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "excl/tensor.hpp"

namespace excl {

enum class Role { parameter, intermediate, input };

/// Trainable tensor with its accumulated gradient.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  Parameter(std::string n, Matrix<Scalar> v)
      : name(std::move(n)), value(std::move(v)) {
    grad.setZero(value.rows(), value.cols());
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

/// Ordered, named collection of parameters with stable addresses.
template <typename Scalar>
class ParameterStore {
 public:
  Parameter<Scalar>& add(const std::string& name, Matrix<Scalar> init) {
    if (index_.count(name)) throw ShapeError("duplicate parameter name: " + name);
    index_.emplace(name, params_.size());
    params_.push_back(std::make_unique<Parameter<Scalar>>(name, std::move(init)));
    return *params_.back();
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Parameter<Scalar>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ShapeError("unknown parameter: " + name);
    return *params_[it->second];
  }
  const Parameter<Scalar>& at(const std::string& name) const {
    return const_cast<ParameterStore*>(this)->at(name);
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  Eigen::Index num_scalars() const {
    Eigen::Index n = 0;
    for (const auto& p : params_) n += p->size();
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& p : params_) out.push_back(p->name);
    return out;
  }

  template <typename Other>
  ParameterStore<Other> cast() const {
    ParameterStore<Other> out;
    for (const auto& p : params_) out.add(p->name, p->value.template cast<Other>());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::map<std::string, std::size_t> index_;
};

template <typename Scalar>
class Tape;

/// Handle to a node on a Tape.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Matrix<Scalar>& value() const { return tape->value(*this); }
  Matrix<Scalar>& grad() const { return tape->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Shape shape() const { return shape_of(value()); }
  Scalar scalar() const { return value()(0, 0); }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward()
/// walks them in reverse and ACCUMULATES into gradients (parameters keep
/// their gradient across calls until the caller zeroes them).
/// A tape is single-threaded; independent tapes share nothing mutable
/// except the parameters they reference.
template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, Var<Scalar>)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var<Scalar> input(Mat value, bool requires_grad = false) {
    check_finite("input", value);
    Node n;
    n.value = std::move(value);
    n.role = Role::input;
    n.requires_grad = requires_grad && record_;
    n.op = "input";
    return append(std::move(n));
  }

  Var<Scalar> parameter(Parameter<Scalar>& p) {
    Node n;
    n.ref = &p.value;
    n.grad_ref = &p.grad;
    n.role = Role::parameter;
    n.requires_grad = record_;
    n.op = "parameter";
    return append(std::move(n));
  }

  /// Appends an op result. `fn` receives the tape and the new node and must
  /// route that node's gradient to its inputs via accumulate().
  Var<Scalar> push(const char* op, Mat value, bool requires_grad, BackwardFn fn) {
    check_finite(op, value);
    Node n;
    n.value = std::move(value);
    n.role = Role::intermediate;
    n.requires_grad = requires_grad && record_;
    n.op = op;
    if (n.requires_grad) n.backward = std::move(fn);
    return append(std::move(n));
  }

  const Mat& value(Var<Scalar> v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.ref ? *n.ref : n.value;
  }

  Mat& grad(Var<Scalar> v) {
    Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    Mat& g = n.grad_ref ? *n.grad_ref : n.grad;
    const Mat& val = n.ref ? *n.ref : n.value;
    if (g.rows() != val.rows() || g.cols() != val.cols()) g.setZero(val.rows(), val.cols());
    return g;
  }

  bool has_grad(Var<Scalar> v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    return n.grad_ref != nullptr || n.grad.size() > 0;
  }

  bool requires_grad(Var<Scalar> v) const {
    return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad;
  }

  Role role(Var<Scalar> v) const { return nodes_.at(static_cast<std::size_t>(v.id)).role; }

  template <typename Derived>
  void accumulate(Var<Scalar> v, const Eigen::MatrixBase<Derived>& g) {
    if (!requires_grad(v)) return;
    grad(v) += g;
  }

  void backward(Var<Scalar> loss, Scalar seed = Scalar(1)) {
    if (loss.rows() != 1 || loss.cols() != 1)
      throw ShapeError("backward: loss must be scalar, got " + to_string(loss.shape()));
    if (!record_) throw ShapeError("backward: tape was created with recording disabled");
    if (!requires_grad(loss)) return;
    grad(loss)(0, 0) += seed;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.size() == 0) continue;
      n.backward(*this, Var<Scalar>{this, i});
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    const Mat* ref = nullptr;
    Mat* grad_ref = nullptr;
    Role role = Role::intermediate;
    bool requires_grad = false;
    const char* op = "";
    BackwardFn backward;
  };

  static void check_finite(const char* op, const Mat& m) {
    if (!m.allFinite())
      throw NumericError(std::string(op) + ": non-finite value in output " + to_string(shape_of(m)));
  }

  Var<Scalar> append(Node n) {
    nodes_.push_back(std::move(n));
    return Var<Scalar>{this, static_cast<int>(nodes_.size() - 1)};
  }

  std::deque<Node> nodes_;
  bool record_;
};

}  // namespace excl
