#ifndef PROBF_FILTER_HPP
#define PROBF_FILTER_HPP

#include <cstdint>

#include "probf/barrier.hpp"
#include "probf/gp.hpp"
#include "probf/socp.hpp"
#include "probf/types.hpp"

namespace probf {

/// delta reduction on infeasibility: multiply by factor up to `attempts`
/// times, then drop to zero. keep_for_episode makes the reduced value stick
/// for the remainder of an episode (handled by the episode loop).
/// trust_scale guards against blown-up projections: an attempt landing
/// further than trust_scale * (1 + |u_d|_inf) from u_d counts as infeasible
/// (the pointwise constraint has no meaning that far from the operating
/// point); with every rung rejected the filter returns u_d flagged
/// infeasible.
struct BackoffSchedule {
  double factor = 0.5;
  int attempts = 6;
  bool keep_for_episode = true;
  double trust_scale = 4.0;
};

/// Chance-constrained projection of u_d with delta backoff. Total: the worst
/// case returns u_d flagged infeasible. feasible_at_requested_delta doubles
/// as the infeasibility early warning.
FilterResult probf_filter(const GPResidualModel& gp, const ConstraintConstants& cc,
                          const StateVec& x, const ControlVec& u_d, double delta_request,
                          const BackoffSchedule& schedule = {});

/// Same projection from precomputed posterior blocks.
FilterResult probf_filter_blocks(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                                 const ControlVec& u_d, double delta_request,
                                 const BackoffSchedule& schedule = {});

/// Monte-Carlo check of the chance constraint: sample d from the posterior
/// at (x, u) and return the fraction of draws violating the safety
/// inequality. Deterministic given the seed for any thread count.
double chance_validate(const PosteriorBlocks& blocks, const ConstraintConstants& cc,
                       const ControlVec& u, long n_samples, std::uint64_t seed,
                       Exec mode = Exec::Parallel);

}  // namespace probf

#endif  // PROBF_FILTER_HPP
