#include "emodub/grad_check.h"

#include <algorithm>
#include <cmath>

#include "emodub/errors.h"
#include "emodub/optim.h"

namespace emodub {

namespace {

double eval_loss(const LossBuilder& loss) {
  Tape tape;
  const double v = loss(tape).value()(0, 0);
  if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
  return v;
}

}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, const ParameterList& params, GradCheckOptions opts) {
  zero_grads(params);
  std::vector<Matrix> analytic;
  {
    Tape tape;
    Var l = loss(tape);
    if (!std::isfinite(l.value()(0, 0))) throw NumericError("grad_check: loss is not finite");
    tape.backward(l);
    for (Parameter* p : params) analytic.push_back(p->grad);
  }
  zero_grads(params);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter& p = *params[pi];
    ParamGradError pe{p.name, 0.0, 0.0, 0.0};
    auto values = p.value.data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + opts.eps;
      const double up = eval_loss(loss);
      values[i] = saved - opts.eps;
      const double down = eval_loss(loss);
      values[i] = saved;
      report.evaluations += 2;

      const double numeric = (up - down) / (2.0 * opts.eps);
      const double a = analytic[pi].data()[i];
      const double diff = std::abs(a - numeric);
      const double rel = diff <= opts.abs_floor ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
      pe.max_rel_error = std::max(pe.max_rel_error, rel);
      pe.max_abs_analytic = std::max(pe.max_abs_analytic, std::abs(a));
      pe.max_abs_diff = std::max(pe.max_abs_diff, diff);
    }
    report.max_rel_error = std::max(report.max_rel_error, pe.max_rel_error);
    report.max_abs_diff = std::max(report.max_abs_diff, pe.max_abs_diff);
    report.per_param.push_back(pe);
  }
  return report;
}

}  // namespace emodub
