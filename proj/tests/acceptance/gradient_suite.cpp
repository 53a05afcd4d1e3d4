#include "gradient_suite.hpp"

#include "gradcheck.hpp"

GradientSuiteOutcome run_gradient_suite(std::size_t instances) {
  GradientSuiteOutcome out;
  out.pass = true;
  out.instances = instances;
  double worst_ratio = 0.0;
  auto run = [&](const std::vector<gradcheck::Case>& cases, double& worst) {
    for (const auto& c : cases) {
      ++out.cases;
      for (std::uint64_t seed = 1; seed <= instances; ++seed) {
        const auto r = c.run(seed);
        worst = std::max(worst, r.max_rel);
        if (r.max_rel / c.tolerance > worst_ratio) {
          worst_ratio = r.max_rel / c.tolerance;
          out.worst_case = c.name;
        }
        if (!(r.max_rel < c.tolerance) || r.entries == 0) out.pass = false;
      }
    }
  };
  run(gradcheck::op_cases(), out.worst_op);
  run(gradcheck::composed_cases(), out.worst_composed);
  return out;
}
