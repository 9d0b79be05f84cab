#include "safectl/constraints/constraints.hpp"

#include "safectl/errors.hpp"

namespace safectl::constraints {

namespace {

Eigen::VectorXd select(const ConstraintSpec& spec, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& u) {
  const Eigen::VectorXd* src = nullptr;
  Eigen::VectorXd both;
  switch (spec.target) {
    case ConstraintTarget::State: src = &x; break;
    case ConstraintTarget::Input: src = &u; break;
    case ConstraintTarget::Both:
      both.resize(x.size() + u.size());
      both << x, u;
      src = &both;
      break;
  }
  Eigen::VectorXd v(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) {
    if (spec.selector[i] < 0 || spec.selector[i] >= src->size())
      throw DimensionError("ConstraintSpec: selector index out of range");
    v(i) = (*src)(spec.selector[i]);
  }
  return v;
}

// Column index of selected entry i in the stacked [x; u] vector.
int stacked_index(const ConstraintSpec& spec, int i, int nx) {
  switch (spec.target) {
    case ConstraintTarget::State: return spec.selector[i];
    case ConstraintTarget::Input: return nx + spec.selector[i];
    case ConstraintTarget::Both: return spec.selector[i];
  }
  return spec.selector[i];
}

}  // namespace

int ConstraintSpec::num_rows() const {
  switch (form) {
    case Form::Linear: return static_cast<int>(b.size());
    case Form::Bound: return 2 * dim();
    case Form::Quadratic: return 1;
  }
  return 0;
}

ConstraintSpec ConstraintSpec::bound(ConstraintTarget target, std::vector<int> selector,
                                     Eigen::VectorXd lower, Eigen::VectorXd upper) {
  ConstraintSpec s;
  s.form = Form::Bound;
  s.target = target;
  s.selector = std::move(selector);
  if (lower.size() != s.dim() || upper.size() != s.dim())
    throw DimensionError("ConstraintSpec::bound: bound size mismatch");
  for (int i = 0; i < s.dim(); ++i)
    if (lower(i) > upper(i)) throw DimensionError("ConstraintSpec::bound: lower > upper");
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  return s;
}

ConstraintSpec ConstraintSpec::linear(ConstraintTarget target, std::vector<int> selector,
                                      Eigen::MatrixXd A, Eigen::VectorXd b) {
  ConstraintSpec s;
  s.form = Form::Linear;
  s.target = target;
  s.selector = std::move(selector);
  if (A.cols() != s.dim() || A.rows() != b.size())
    throw DimensionError("ConstraintSpec::linear: size mismatch");
  s.A = std::move(A);
  s.b = std::move(b);
  return s;
}

ConstraintSpec ConstraintSpec::quadratic(ConstraintTarget target, std::vector<int> selector,
                                         Eigen::MatrixXd P, double r) {
  ConstraintSpec s;
  s.form = Form::Quadratic;
  s.target = target;
  s.selector = std::move(selector);
  if (P.rows() != s.dim() || P.cols() != s.dim())
    throw DimensionError("ConstraintSpec::quadratic: P size mismatch");
  s.P = std::move(P);
  s.r = r;
  return s;
}

int ConstraintSet::total_rows() const {
  int n = 0;
  for (const auto& s : items) n += s.num_rows();
  return n;
}

Eigen::VectorXd evaluate_constraints(const ConstraintSet& set, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u) {
  Eigen::VectorXd out(set.total_rows());
  int row = 0;
  for (const auto& spec : set.items) {
    Eigen::VectorXd v = select(spec, x, u);
    switch (spec.form) {
      case ConstraintSpec::Form::Linear:
        out.segment(row, spec.b.size()) =
            (spec.A * v - spec.b).array() + spec.margin;
        row += static_cast<int>(spec.b.size());
        break;
      case ConstraintSpec::Form::Bound:
        for (int i = 0; i < spec.dim(); ++i) {
          out(row++) = v(i) - spec.upper(i) + spec.margin;
          out(row++) = spec.lower(i) - v(i) + spec.margin;
        }
        break;
      case ConstraintSpec::Form::Quadratic:
        out(row++) = v.dot(spec.P * v) - spec.r + spec.margin;
        break;
    }
  }
  return out;
}

bool any_violation(const ConstraintSet& set, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& u) {
  if (set.empty()) return false;
  return evaluate_constraints(set, x, u).maxCoeff() > kViolationTol;
}

LinearRows as_linear_rows(const ConstraintSet& set, const Eigen::VectorXd& x_bar,
                          const Eigen::VectorXd& u_bar) {
  const int nx = static_cast<int>(x_bar.size());
  const int nu = static_cast<int>(u_bar.size());
  LinearRows out;
  out.G = Eigen::MatrixXd::Zero(set.total_rows(), nx + nu);
  out.h.resize(set.total_rows());
  int row = 0;
  for (const auto& spec : set.items) {
    switch (spec.form) {
      case ConstraintSpec::Form::Linear:
        for (int k = 0; k < spec.b.size(); ++k) {
          for (int i = 0; i < spec.dim(); ++i)
            out.G(row, stacked_index(spec, i, nx)) = spec.A(k, i);
          out.h(row) = spec.b(k) - spec.margin;
          ++row;
        }
        break;
      case ConstraintSpec::Form::Bound:
        for (int i = 0; i < spec.dim(); ++i) {
          int col = stacked_index(spec, i, nx);
          out.G(row, col) = 1.0;
          out.h(row) = spec.upper(i) - spec.margin;
          ++row;
          out.G(row, col) = -1.0;
          out.h(row) = -spec.lower(i) - spec.margin;
          ++row;
        }
        break;
      case ConstraintSpec::Form::Quadratic: {
        // Tangent at v_bar: 2 v_bar' P v <= r + v_bar' P v_bar.
        Eigen::VectorXd v_bar = [&] {
          Eigen::VectorXd full(nx + nu);
          full << x_bar, u_bar;
          Eigen::VectorXd v(spec.dim());
          for (int i = 0; i < spec.dim(); ++i) v(i) = full(stacked_index(spec, i, nx));
          return v;
        }();
        Eigen::VectorXd grad = 2.0 * spec.P * v_bar;
        for (int i = 0; i < spec.dim(); ++i)
          out.G(row, stacked_index(spec, i, nx)) = grad(i);
        out.h(row) = spec.r + v_bar.dot(spec.P * v_bar) - spec.margin;
        ++row;
        break;
      }
    }
  }
  return out;
}

std::vector<ConstraintSet> tighten(const ConstraintSet& set,
                                   const std::vector<Eigen::VectorXd>& per_step_margins) {
  std::vector<ConstraintSet> out;
  out.reserve(per_step_margins.size());
  for (const auto& m : per_step_margins) {
    if (m.size() != static_cast<long>(set.items.size()))
      throw DimensionError("tighten: margin vector size must match item count");
    if (m.size() > 0 && m.minCoeff() < 0.0)
      throw DimensionError("tighten: negative margin");
    ConstraintSet tightened = set;
    for (size_t j = 0; j < tightened.items.size(); ++j)
      tightened.items[j].margin += m(static_cast<int>(j));
    out.push_back(std::move(tightened));
  }
  return out;
}

}  // namespace safectl::constraints
