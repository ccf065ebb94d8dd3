#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "sufisent/numarray.hpp"

namespace sufisent {

// Named view of one trainable array. The pointee is owned elsewhere (a model
// struct); optimizer, checkpointing and gradient checking all iterate these.
struct ParamRef {
  std::string name;
  NumArray* array;
};

struct GradCheckEntry {
  std::string param;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  double step = 0.0;
  std::vector<std::pair<std::string, double>> per_param;  // max rel err per parameter
  std::vector<GradCheckEntry> worst;                      // largest offenders, descending
  bool pass() const { return max_rel_err < tolerance; }
};

// Relative error with a floored denominator: entries whose analytic and
// numeric gradients are both below the floor are compared absolutely, which
// keeps central-difference roundoff (~eps*|f|/h) from flagging negligible
// gradients.
inline double gradcheck_rel_err(double analytic, double numeric, double floor = 1e-3) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// The closure evaluates the scalar loss from the current parameter values;
// when grads_out is non-null it also fills one gradient array per parameter,
// in the order of `params` (one graph build + backward()).
using LossFn = std::function<double(std::vector<NumArray>* grads_out)>;

// Central differences (f(p+h) - f(p-h)) / 2h per scalar, compared against the
// closure's analytic gradients.
inline GradCheckReport grad_check(const LossFn& f, const std::vector<ParamRef>& params, double h,
                                  double tolerance, std::size_t keep_worst = 10) {
  if (h <= 0.0) throw NumericError("grad_check: step must be positive");
  GradCheckReport report;
  report.tolerance = tolerance;
  report.step = h;

  std::vector<NumArray> analytic;
  f(&analytic);
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: closure returned " + std::to_string(analytic.size()) +
                     " gradients for " + std::to_string(params.size()) + " parameters");
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    NumArray& arr = *params[pi].array;
    const NumArray& grad = analytic[pi];
    if (!grad.same_shape(arr)) {
      throw ShapeError("grad_check: gradient shape " + shape_str(grad.shape) + " vs parameter " +
                       params[pi].name + " " + shape_str(arr.shape));
    }
    double param_max = 0.0;
    for (std::size_t i = 0; i < arr.numel(); ++i) {
      double orig = arr[i];
      arr[i] = orig + h;
      double fp = f(nullptr);
      arr[i] = orig - h;
      double fm = f(nullptr);
      arr[i] = orig;
      double numeric = (fp - fm) / (2.0 * h);
      double rel = gradcheck_rel_err(grad[i], numeric);
      param_max = std::max(param_max, rel);
      if (report.worst.size() < keep_worst || rel > report.worst.back().rel_err) {
        GradCheckEntry e{params[pi].name, i, grad[i], numeric, rel};
        report.worst.push_back(e);
        std::sort(report.worst.begin(), report.worst.end(),
                  [](const GradCheckEntry& a, const GradCheckEntry& b) {
                    return a.rel_err > b.rel_err;
                  });
        if (report.worst.size() > keep_worst) report.worst.resize(keep_worst);
      }
    }
    report.per_param.emplace_back(params[pi].name, param_max);
    report.max_rel_err = std::max(report.max_rel_err, param_max);
  }
  return report;
}

}  // namespace sufisent
