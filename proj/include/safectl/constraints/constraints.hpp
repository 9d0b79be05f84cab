#pragma once

#include <Eigen/Dense>
#include <vector>

namespace safectl::constraints {

enum class ConstraintTarget { State, Input, Both };

/// One scalar-or-stacked constraint c(x, u) <= 0, in one of three forms over
/// the selected entries v of the target vector:
///   Linear:    A v <= b          (one row of c per row of A)
///   Bound:     lower <= v <= upper  (expands to two rows per entry)
///   Quadratic: v'P v <= r        (one row)
/// `margin` tightens: the reported value is c + margin, so feasibility with
/// margin means c <= -margin.
struct ConstraintSpec {
  enum class Form { Linear, Bound, Quadratic };

  Form form = Form::Bound;
  ConstraintTarget target = ConstraintTarget::State;
  std::vector<int> selector;  // indices into the target vector

  Eigen::MatrixXd A;      // Linear
  Eigen::VectorXd b;      // Linear
  Eigen::VectorXd lower;  // Bound
  Eigen::VectorXd upper;  // Bound
  Eigen::MatrixXd P;      // Quadratic (PSD)
  double r = 0.0;         // Quadratic

  double margin = 0.0;

  int num_rows() const;
  int dim() const { return static_cast<int>(selector.size()); }

  static ConstraintSpec bound(ConstraintTarget target, std::vector<int> selector,
                              Eigen::VectorXd lower, Eigen::VectorXd upper);
  static ConstraintSpec linear(ConstraintTarget target, std::vector<int> selector,
                               Eigen::MatrixXd A, Eigen::VectorXd b);
  static ConstraintSpec quadratic(ConstraintTarget target, std::vector<int> selector,
                                  Eigen::MatrixXd P, double r);
};

struct ConstraintSet {
  std::vector<ConstraintSpec> items;

  bool empty() const { return items.empty(); }
  int total_rows() const;
};

/// Stacked values c_effective = c + margin for every row of every item,
/// in declaration order. <= 0 means satisfied.
Eigen::VectorXd evaluate_constraints(const ConstraintSet& set, const Eigen::VectorXd& x,
                                     const Eigen::VectorXd& u);

/// Per-step violation predicate used by all metrics.
inline constexpr double kViolationTol = 1e-8;
bool any_violation(const ConstraintSet& set, const Eigen::VectorXd& x,
                   const Eigen::VectorXd& u);

/// Rows G [x; u] <= h for QP embedding. Linear and Bound forms pass through
/// exactly; Quadratic forms are replaced by their tangent at (x_bar, u_bar).
struct LinearRows {
  Eigen::MatrixXd G;  // rows x (nx + nu)
  Eigen::VectorXd h;
};
LinearRows as_linear_rows(const ConstraintSet& set, const Eigen::VectorXd& x_bar,
                          const Eigen::VectorXd& u_bar);

/// Step-indexed copies with margins[i](j) added to item j's margin at step i.
/// The input set is unmodified. Throws on negative margins.
std::vector<ConstraintSet> tighten(const ConstraintSet& set,
                                   const std::vector<Eigen::VectorXd>& per_step_margins);

}  // namespace safectl::constraints
