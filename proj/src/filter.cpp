#include "probf/filter.hpp"

#include <cmath>
#include <vector>

#include "probf/errors.hpp"
#include "probf/parallel.hpp"
#include "probf/rng.hpp"

namespace probf {

FilterResult probf_filter_blocks(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                                 const ControlVec& u_d, double delta_request,
                                 const BackoffSchedule& schedule) {
  if (delta_request < 0.0) throw ContractViolation("probf_filter: delta_request < 0");
  FilterResult res;
  res.u = u_d;
  res.delta_used = 0.0;
  res.feasible_at_requested_delta = false;
  res.slack = 0.0;
  res.solver_iterations = 0;

  // requested delta, then `attempts` shrunken tries, then the mean filter
  std::vector<double> ladder;
  ladder.push_back(delta_request);
  if (delta_request > 0.0) {
    double d = delta_request;
    for (int k = 0; k < schedule.attempts; ++k) {
      d *= schedule.factor;
      ladder.push_back(d);
    }
    ladder.push_back(0.0);
  }
  for (std::size_t attempt = 0; attempt < ladder.size(); ++attempt) {
    const double delta = ladder[attempt];
    const auto program = build_program(blocks, cc, u_d, delta);
    SolveResult sol;
    try {
      sol = solve(program);
    } catch (const SolverStall& e) {
      // totality: a stalled attempt counts as failed and the ladder moves on
      res.solver_iterations += static_cast<int>(e.iterate.size() > 0) * 500;
      continue;
    }
    res.solver_iterations += sol.iterations;
    if (sol.status == SolveStatus::Optimal) {
      const ControlVec u = sol.u_bar.head(u_d.size());
      const double trust = schedule.trust_scale * (1.0 + u_d.lpNorm<Eigen::Infinity>());
      if ((u - u_d).lpNorm<Eigen::Infinity>() > trust) {
        continue;  // absurdly far projection: treat as infeasible, back off
      }
      res.u = u;
      res.delta_used = delta;
      res.feasible_at_requested_delta = attempt == 0;
      res.slack = constraint_value(blocks, cc, res.u, delta);
      return res;
    }
  }
  // total fallback: hand back the desired control, flagged
  res.u = u_d;
  res.delta_used = 0.0;
  res.feasible_at_requested_delta = false;
  res.slack = constraint_value(blocks, cc, u_d, 0.0);
  return res;
}

FilterResult probf_filter(const GPResidualModel& gp, const ConstraintConstants& cc,
                          const StateVec& x, const ControlVec& u_d, double delta_request,
                          const BackoffSchedule& schedule) {
  return probf_filter_blocks(posterior_blocks(gp, x), cc, u_d, delta_request, schedule);
}

double chance_validate(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                       const ControlVec& u, long n_samples, std::uint64_t seed, Exec mode) {
  if (n_samples < 1) throw ContractViolation("chance_validate: need at least one sample");
  const double constant = cc.c_a.dot(u) + cc.c_b;
  const auto [mu, var] = predict_from_blocks(blocks, u, 1.0 + std::abs(blocks.sigma_b2));
  const double sd = std::sqrt(var);
  const long long violations =
      count_if_index(static_cast<std::size_t>(n_samples), mode, [&](std::size_t i) {
        const double d = mu + sd * counter_normal(seed, static_cast<std::uint64_t>(i));
        return constant + d <= 0.0;
      });
  return static_cast<double>(violations) / static_cast<double>(n_samples);
}

}  // namespace probf
