#include "ugre/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ugre/rng.hpp"

namespace ugre {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

ShapeError::ShapeError(const std::string& what, const Shape& a, const Shape& b)
    : std::invalid_argument(what + ": shape mismatch " + shape_string(a) +
                            " vs " + shape_string(b)) {}

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Shape span_shape(std::size_t n) { return Shape{n}; }

void require_same(const char* what, std::size_t a, std::size_t b) {
  if (a != b) throw ShapeError(what, span_shape(a), span_shape(b));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw ShapeError("Tensor", shape_, span_shape(data_.size()));
  }
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor(Shape{n}, std::move(data));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> data) {
  return Tensor(Shape{rows, cols}, std::move(data));
}

std::size_t Tensor::rows() const { return shape_.empty() ? 1 : shape_[0]; }

std::size_t Tensor::cols() const {
  if (shape_.size() <= 1) return 1;
  return product(Shape(shape_.begin() + 1, shape_.end()));
}

std::span<double> Tensor::row(std::size_t r) {
  const std::size_t c = shape_.size() <= 1 ? 1 : cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row(std::size_t r) const {
  const std::size_t c = shape_.size() <= 1 ? 1 : cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

ParamSlot::ParamSlot(std::string name, Tensor value, LearningRateGroup group)
    : name(std::move(name)),
      value(std::move(value)),
      grad(this->value.shape()),
      group(group) {}

namespace ops {

std::vector<double> matvec(const Tensor& w, std::span<const double> x) {
  if (w.shape().size() != 2 || w.cols() != x.size()) {
    throw ShapeError("matvec", w.shape(), span_shape(x.size()));
  }
  std::vector<double> y(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) y[r] = dot(w.row(r), x);
  return y;
}

void matvec_backward(const Tensor& w, std::span<const double> x,
                     std::span<const double> dy, Tensor* dw,
                     std::span<double> dx) {
  require_same("matvec_backward dy", dy.size(), w.rows());
  if (dw) {
    if (dw->shape() != w.shape()) {
      throw ShapeError("matvec_backward dW", dw->shape(), w.shape());
    }
    for (std::size_t r = 0; r < w.rows(); ++r) axpy(dy[r], x, dw->row(r));
  }
  if (!dx.empty()) {
    require_same("matvec_backward dx", dx.size(), w.cols());
    for (std::size_t r = 0; r < w.rows(); ++r) axpy(dy[r], w.row(r), dx);
  }
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.cols()) {
    throw ShapeError("matmul_nt", a.shape(), b.shape());
  }
  Tensor c(Shape{a.rows(), b.rows()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) c.at(i, j) = dot(ai, b.row(j));
  }
  return c;
}

void matmul_nt_backward(const Tensor& a, const Tensor& b, const Tensor& dc,
                        Tensor* da, Tensor* db) {
  if (dc.shape() != Shape{a.rows(), b.rows()}) {
    throw ShapeError("matmul_nt_backward dC", dc.shape(),
                     Shape{a.rows(), b.rows()});
  }
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double g = dc.at(i, j);
      if (g == 0.0) continue;
      if (da) axpy(g, b.row(j), da->row(i));
      if (db) axpy(g, a.row(i), db->row(j));
    }
  }
}

std::vector<double> add(std::span<const double> a, std::span<const double> b) {
  require_same("add", a.size(), b.size());
  std::vector<double> y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] + b[i];
  return y;
}

void add_backward(std::span<const double> dy, std::span<double> da,
                  std::span<double> db) {
  if (!da.empty()) axpy(1.0, dy, da);
  if (!db.empty()) axpy(1.0, dy, db);
}

std::vector<double> concat(const std::vector<std::span<const double>>& parts) {
  std::vector<double> y;
  for (const auto& p : parts) y.insert(y.end(), p.begin(), p.end());
  return y;
}

void concat_backward(std::span<const double> dy,
                     const std::vector<std::span<double>>& dparts) {
  std::size_t total = 0;
  for (const auto& p : dparts) total += p.size();
  require_same("concat_backward", dy.size(), total);
  std::size_t offset = 0;
  for (const auto& p : dparts) {
    axpy(1.0, dy.subspan(offset, p.size()), p);
    offset += p.size();
  }
}

std::vector<double> tanh(std::span<const double> x) {
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  return y;
}

void tanh_backward(std::span<const double> y, std::span<const double> dy,
                   std::span<double> dx) {
  require_same("tanh_backward", y.size(), dy.size());
  require_same("tanh_backward", y.size(), dx.size());
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

std::vector<double> softmax(std::span<const double> x) {
  if (x.empty()) return {};
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> y(x.size());
  double z = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = std::exp(x[i] - m);
    z += y[i];
  }
  for (auto& v : y) v /= z;
  return y;
}

void softmax_backward(std::span<const double> y, std::span<const double> dy,
                      std::span<double> dx) {
  require_same("softmax_backward", y.size(), dy.size());
  require_same("softmax_backward", y.size(), dx.size());
  const double s = dot(y, dy);
  for (std::size_t i = 0; i < y.size(); ++i) dx[i] += y[i] * (dy[i] - s);
}

std::vector<double> log_softmax(std::span<const double> x) {
  if (x.empty()) return {};
  const double m = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - m);
  const double lz = m + std::log(z);
  std::vector<double> y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] - lz;
  return y;
}

MaxOverTime max_over_time(const Tensor& h) {
  if (h.shape().size() != 2 || h.rows() == 0) {
    throw ShapeError("max_over_time", h.shape(), Shape{1, h.cols()});
  }
  MaxOverTime out;
  out.values.assign(h.row(0).begin(), h.row(0).end());
  out.argmax.assign(h.cols(), 0);
  for (std::size_t t = 1; t < h.rows(); ++t) {
    const auto r = h.row(t);
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] > out.values[i]) {
        out.values[i] = r[i];
        out.argmax[i] = t;
      }
    }
  }
  return out;
}

void max_over_time_backward(const MaxOverTime& fwd, std::span<const double> dy,
                            Tensor& dh) {
  require_same("max_over_time_backward", dy.size(), fwd.argmax.size());
  if (dh.cols() != dy.size()) {
    throw ShapeError("max_over_time_backward dH", dh.shape(),
                     span_shape(dy.size()));
  }
  for (std::size_t i = 0; i < dy.size(); ++i) dh.at(fwd.argmax[i], i) += dy[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same("dot", a.size(), b.size());
  // Four partial sums in a fixed order: deterministic, and not bound by the
  // latency of a single add chain.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  const std::size_t n = a.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

void dot_backward(std::span<const double> a, std::span<const double> b,
                  double dy, std::span<double> da, std::span<double> db) {
  if (!da.empty()) axpy(dy, b, da);
  if (!db.empty()) axpy(dy, a, db);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same("axpy", x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace ops

void sgd_step(std::span<ParamSlot* const> params, double lr_kg, double lr_net) {
  for (const ParamSlot* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      throw ShapeError("sgd_step " + p->name, p->grad.shape(),
                       p->value.shape());
    }
    if (!p->grad.all_finite()) {
      throw std::runtime_error("sgd_step: non-finite gradient in " + p->name);
    }
  }
  for (ParamSlot* p : params) {
    const double lr = p->group == LearningRateGroup::kg ? lr_kg : lr_net;
    auto v = p->value.data();
    auto g = p->grad.data();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = v[i] - lr * g[i];
    p->grad.fill(0.0);
  }
}

GradCheckReport finite_difference_check(
    const std::function<double()>& loss_fn,
    const std::function<void()>& grad_fn, std::span<ParamSlot* const> params,
    const GradCheckOptions& options) {
  grad_fn();
  // Snapshot analytic gradients; loss evaluations below must not see them.
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamSlot* p : params) analytic.push_back(p->grad);

  GradCheckReport report;
  Rng rng(options.seed);
  for (std::size_t s = 0; s < params.size(); ++s) {
    ParamSlot& slot = *params[s];
    const std::size_t n = slot.value.size();
    if (n == 0) continue;

    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    rng.shuffle(coords);
    if (options.prefer_nonzero) {
      std::stable_partition(coords.begin(), coords.end(), [&](std::size_t i) {
        return analytic[s][i] != 0.0;
      });
    }
    coords.resize(std::min(n, options.samples_per_slot));

    for (std::size_t idx : coords) {
      double& x = slot.value[idx];
      const double saved = x;
      x = saved + options.epsilon;
      const double up = loss_fn();
      x = saved - options.epsilon;
      const double down = loss_fn();
      x = saved;
      const double numeric = (up - down) / (2.0 * options.epsilon);
      const double a = analytic[s][idx];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(numeric));
      report.max_error = std::max(report.max_error, err);
      ++report.checked;
      if (!(err <= options.tolerance)) {
        report.failures.push_back({slot.name, idx, a, numeric, err});
      }
    }
    report.slots_covered.push_back(slot.name);
  }
  return report;
}

}  // namespace ugre
