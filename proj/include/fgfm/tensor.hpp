#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace fgfm {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float64 array with optional gradient buffer. A Tensor is a
// cheap handle onto shared storage, so tape closures and callers see the same
// values and gradients.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape[axis]; }
  std::size_t size() const { return storage_->values.size(); }

  std::vector<double>& values() { return storage_->values; }
  const std::vector<double>& values() const { return storage_->values; }
  double* data() { return storage_->values.data(); }
  const double* data() const { return storage_->values.data(); }

  double& at(std::size_t i) { return storage_->values[i]; }
  double at(std::size_t i) const { return storage_->values[i]; }
  // Row-major 2-D access.
  double& at(std::size_t i, std::size_t j) {
    return storage_->values[i * storage_->shape[1] + j];
  }
  double at(std::size_t i, std::size_t j) const {
    return storage_->values[i * storage_->shape[1] + j];
  }
  double item() const;

  bool requires_grad() const { return storage_ && storage_->requires_grad; }
  void set_requires_grad(bool flag);
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Identity of the underlying storage, for aliasing checks in tests.
  const void* storage_id() const { return storage_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on demand, same length as values
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

// Reverse-mode tape: ops append one backward step per recorded primitive, in
// execution order, so the reverse sweep is a valid topological replay.
// backward() zeroes the grads of recorded op outputs (intermediates) before
// replaying, so leaf gradients accumulate across repeated calls.
class Tape {
 public:
  void record(Tensor output, std::function<void()> backward_step);
  void backward(Tensor& loss);
  std::size_t size() const { return steps_.size(); }
  void clear();

  static Tape* active();

 private:
  friend class TapeScope;
  struct Step {
    Tensor output;
    std::function<void()> backward;
  };
  std::vector<Step> steps_;
};

// RAII activation of a tape for the current thread. Ops record onto the
// active tape only; with no active tape everything runs in inference mode.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

// Checked mode: ops verify output finiteness and raise NumericError on
// NaN/Inf. On in tests, off by default for training speed.
void set_check_finite(bool enabled);
bool check_finite_enabled();
void check_finite(const Tensor& t, const char* op_name);

}  // namespace fgfm
