#pragma once

// Type-erased scalar fields over R^dim.  A field wraps a generic callable that
// works for any nesting depth of dual scalars, so the same definition can be
// evaluated for values, first, second (and deeper) derivatives.

#include <memory>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "finsler_forge/dual.hpp"
#include "finsler_forge/jet2.hpp"

namespace finsler {

namespace detail {

struct FieldConcept {
  virtual ~FieldConcept() = default;
  virtual double call(std::span<const double> u) const = 0;
  virtual D1 call(std::span<const D1> u) const = 0;
  virtual D2 call(std::span<const D2> u) const = 0;
  virtual D3 call(std::span<const D3> u) const = 0;
  virtual D4 call(std::span<const D4> u) const = 0;
  virtual D5 call(std::span<const D5> u) const = 0;
  virtual D6 call(std::span<const D6> u) const = 0;
};

template <class F>
struct FieldModel final : FieldConcept {
  F f;
  explicit FieldModel(F fn) : f(std::move(fn)) {}
  double call(std::span<const double> u) const override { return f(u); }
  D1 call(std::span<const D1> u) const override { return f(u); }
  D2 call(std::span<const D2> u) const override { return f(u); }
  D3 call(std::span<const D3> u) const override { return f(u); }
  D4 call(std::span<const D4> u) const override { return f(u); }
  D5 call(std::span<const D5> u) const override { return f(u); }
  D6 call(std::span<const D6> u) const override { return f(u); }
};

}  // namespace detail

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int dim, std::shared_ptr<const detail::FieldConcept> impl)
      : dim_(dim), impl_(std::move(impl)) {}

  int dim() const { return dim_; }
  bool valid() const { return impl_ != nullptr; }

  template <class T>
  T operator()(std::span<const T> u) const {
    return impl_->call(u);
  }
  template <class T>
  T operator()(const std::vector<T>& u) const {
    return impl_->call(std::span<const T>(u.data(), u.size()));
  }

 private:
  int dim_ = 0;
  std::shared_ptr<const detail::FieldConcept> impl_;
};

// Build a field from a generic callable f(span<const T>) -> T.
template <class F>
ScalarField make_field(int dim, F f) {
  return ScalarField(dim, std::make_shared<detail::FieldModel<F>>(std::move(f)));
}

inline ScalarField constant_field(int dim, double c) {
  return make_field(dim, [c](auto u) {
    using T = std::decay_t<decltype(u[0])>;
    (void)u;
    return T(c);
  });
}

inline ScalarField coordinate_field(int dim, int index) {
  return make_field(dim, [index](auto u) { return u[index]; });
}

// ---- evaluation helpers ---------------------------------------------------

inline std::vector<double> to_std(const Eigen::VectorXd& u) {
  return std::vector<double>(u.data(), u.data() + u.size());
}

template <class T>
std::vector<T> promote(std::span<const double> u) {
  std::vector<T> r(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) r[i] = T(u[i]);
  return r;
}

inline double field_value(const ScalarField& f, std::span<const double> u) { return f(std::vector<double>(u.begin(), u.end())); }
inline double field_value(const ScalarField& f, const Eigen::VectorXd& u) { return f(to_std(u)); }

// Gradient via one dual level.
inline Eigen::VectorXd field_gradient(const ScalarField& f, const Eigen::VectorXd& u) {
  const auto su = seed(to_std(u));
  const D1 r = f(su);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  for (int i = 0; i < u.size(); ++i)
    if (!r.d.empty()) g[i] = r.d[i];
  return g;
}

// Full second-order jet via two nested dual levels.
inline Jet2 field_jet2(const ScalarField& f, const Eigen::VectorXd& u) {
  const int n = static_cast<int>(u.size());
  const auto inner = seed(to_std(u));       // D1 coordinates
  const auto outer = seed(inner);           // D2 coordinates
  const D2 r = f(outer);
  Jet2 out;
  out.value = value_of(r);
  out.grad = Eigen::VectorXd::Zero(n);
  out.hess = Eigen::MatrixXd::Zero(n, n);
  if (!r.v.d.empty())
    for (int i = 0; i < n; ++i) out.grad[i] = r.v.d[i];
  for (int i = 0; i < n; ++i) {
    if (r.d.empty()) break;
    const D1& ri = r.d[i];
    if (ri.d.empty()) continue;
    for (int j = 0; j < n; ++j) out.hess(i, j) = ri.d[j];
  }
  out.hess = 0.5 * (out.hess + out.hess.transpose()).eval();  // enforce symmetry
  return out;
}

// Directional derivative of a generic callable g(span<const T>) -> T along
// coordinate `index`, keeping the scalar type T.
template <class T, class G>
T partial(const G& g, std::span<const T> u, int index) {
  std::vector<Dual<T>> du(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) du[i].v = u[i];
  du[static_cast<std::size_t>(index)].d.assign(1, T(1.0));
  const Dual<T> r = g(std::span<const Dual<T>>(du.data(), du.size()));
  return r.d.empty() ? T(0.0) : r.d[0];
}

template <class T>
T field_partial(const ScalarField& f, std::span<const T> u, int index) {
  return partial([&f](auto w) { return f(w); }, u, index);
}

}  // namespace finsler
