#pragma once
// Dense 64-bit tensors, forward/backward primitives, SGD and a
// central-difference gradient checker.
//
// Every primitive comes as a pair: `op(...)` computes the forward value and
// `op_backward(...)` accumulates gradients into caller-owned buffers. There is
// no tape; models call the backward functions in reverse composition order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ugre {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(const std::string& what, const Shape& a, const Shape& b);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor vector(std::vector<double> data);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  // Leading dimension; 1 for scalars.
  std::size_t rows() const;
  // Product of the trailing dimensions.
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

enum class LearningRateGroup { kg, net };

struct ParamSlot {
  std::string name;
  Tensor value;
  Tensor grad;
  LearningRateGroup group = LearningRateGroup::net;

  ParamSlot() = default;
  ParamSlot(std::string name, Tensor value, LearningRateGroup group);
};

namespace ops {

// y = W x, W is (rows x cols).
std::vector<double> matvec(const Tensor& w, std::span<const double> x);
// dW += dy x^T ; dx += W^T dy. Either output may be empty to skip it.
void matvec_backward(const Tensor& w, std::span<const double> x,
                     std::span<const double> dy, Tensor* dw,
                     std::span<double> dx);

// C = A B^T with A (m x k), B (n x k). Used for convolution over token rows.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
void matmul_nt_backward(const Tensor& a, const Tensor& b, const Tensor& dc,
                        Tensor* da, Tensor* db);

std::vector<double> add(std::span<const double> a, std::span<const double> b);
void add_backward(std::span<const double> dy, std::span<double> da,
                  std::span<double> db);

std::vector<double> concat(const std::vector<std::span<const double>>& parts);
// Splits dy into the parts' gradient buffers (accumulating).
void concat_backward(std::span<const double> dy,
                     const std::vector<std::span<double>>& dparts);

std::vector<double> tanh(std::span<const double> x);
// Uses the forward output y: dx += dy * (1 - y^2).
void tanh_backward(std::span<const double> y, std::span<const double> dy,
                   std::span<double> dx);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> x);
void softmax_backward(std::span<const double> y, std::span<const double> dy,
                      std::span<double> dx);
std::vector<double> log_softmax(std::span<const double> x);

struct MaxOverTime {
  std::vector<double> values;
  std::vector<std::size_t> argmax;  // row index per column
};
// Column-wise max over the rows of h (T x nu); ties go to the lowest row.
MaxOverTime max_over_time(const Tensor& h);
void max_over_time_backward(const MaxOverTime& fwd, std::span<const double> dy,
                            Tensor& dh);

double dot(std::span<const double> a, std::span<const double> b);
void dot_backward(std::span<const double> a, std::span<const double> b,
                  double dy, std::span<double> da, std::span<double> db);

void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace ops

// value <- value - lr_group * grad, then grad <- 0. Throws on a non-finite
// gradient before touching any slot.
void sgd_step(std::span<ParamSlot* const> params, double lr_kg, double lr_net);

struct GradCheckFailure {
  std::string slot;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  std::vector<std::string> slots_covered;
  std::vector<GradCheckFailure> failures;
  double max_error = 0.0;

  bool ok() const { return failures.empty() && checked > 0; }
};

struct GradCheckOptions {
  double epsilon = 1e-4;
  double tolerance = 1e-3;
  // Coordinates sampled per slot; slots smaller than this are checked fully.
  std::size_t samples_per_slot = 20;
  std::uint64_t seed = 1;
  // Coordinates whose analytic gradient is exactly zero are still checked but
  // not counted toward `samples_per_slot` when this is set, so sparse slots
  // (embedding tables) get meaningful coverage.
  bool prefer_nonzero = true;
};

// `loss_fn` must be deterministic. `grad_fn` zeroes and fills every slot's
// grad with the analytic gradient of the same loss.
GradCheckReport finite_difference_check(
    const std::function<double()>& loss_fn,
    const std::function<void()>& grad_fn, std::span<ParamSlot* const> params,
    const GradCheckOptions& options = {});

}  // namespace ugre
