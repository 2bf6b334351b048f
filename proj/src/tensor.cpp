#include "fgfm/tensor.hpp"

#include <cmath>
#include <sstream>
#include <utility>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {
thread_local Tape* g_active_tape = nullptr;
thread_local bool g_check_finite = false;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw DimensionError("tensor: zero extent in " + shape_str(shape));
  }
  storage_->shape = std::move(shape);
  storage_->values.assign(shape_numel(storage_->shape), 0.0);
  storage_->requires_grad = requires_grad;
  if (requires_grad) storage_->grad.assign(storage_->values.size(), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : Tensor(std::move(shape), requires_grad) {
  if (values.size() != storage_->values.size()) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values for shape " + shape_str(storage_->shape));
  }
  storage_->values = std::move(values);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  for (double& x : t.values()) x = value;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) {
    throw UsageError("item(): tensor has " + std::to_string(size()) + " elements");
  }
  return storage_->values[0];
}

void Tensor::set_requires_grad(bool flag) {
  storage_->requires_grad = flag;
  if (flag && storage_->grad.size() != storage_->values.size()) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  }
}

std::vector<double>& Tensor::grad() {
  if (storage_->grad.size() != storage_->values.size()) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  }
  return storage_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (storage_->grad.size() != storage_->values.size()) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  }
  return storage_->grad;
}

void Tensor::zero_grad() {
  storage_->grad.assign(storage_->values.size(), 0.0);
}

void Tape::record(Tensor output, std::function<void()> backward_step) {
  steps_.push_back(Step{std::move(output), std::move(backward_step)});
}

void Tape::backward(Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw UsageError("backward: loss must be a scalar tensor");
  }
  // Intermediates get fresh gradients each pass; leaves (never an op output)
  // keep theirs, so repeated calls accumulate dLoss/dLeaf.
  for (Step& step : steps_) step.output.zero_grad();
  loss.grad()[0] = 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) it->backward();
}

void Tape::clear() { steps_.clear(); }

Tape* Tape::active() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) {
  g_active_tape = &tape;
}

TapeScope::~TapeScope() { g_active_tape = previous_; }

void set_check_finite(bool enabled) { g_check_finite = enabled; }

bool check_finite_enabled() { return g_check_finite; }

void check_finite(const Tensor& t, const char* op_name) {
  if (!g_check_finite) return;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t.at(i))) {
      throw NumericError(std::string(op_name) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace fgfm
