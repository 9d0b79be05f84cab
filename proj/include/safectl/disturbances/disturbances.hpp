#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace safectl::disturbances {

/// Counter-based generator: every draw is a pure function of
/// (master seed, episode, step, stream, channel, index), so realizations are
/// identical under any evaluation order or parallel schedule.
struct SeedPlan {
  std::uint64_t master = 0;

  double uniform01(std::uint64_t episode, std::uint64_t step, std::uint64_t stream,
                   std::uint64_t channel, std::uint64_t index = 0) const;
  /// Standard normal via Box-Muller on two counter draws.
  double gaussian(std::uint64_t episode, std::uint64_t step, std::uint64_t stream,
                  std::uint64_t channel) const;
};

/// Stream ids keep draws at distinct targets independent.
enum class Stream : std::uint64_t {
  Action = 0,
  Observation = 1,
  Dynamics = 2,
  InitialState = 3,
  Params = 4,
};

enum class DisturbanceTarget { Action, Observation, Dynamics };

struct DisturbanceSpec {
  enum class Kind { WhiteNoise, Step, Impulse };

  DisturbanceTarget target = DisturbanceTarget::Action;
  Kind kind = Kind::WhiteNoise;
  Eigen::VectorXd sigma;      // WhiteNoise: per-channel std dev
  Eigen::VectorXd magnitude;  // Step / Impulse: per-channel offset
  int onset_step = 0;         // Step: first active step; Impulse: the step
  std::vector<int> channels;  // indices into the target vector
};

/// Adds the realization for `spec` at (episode, step) to `value` in place.
void apply_disturbance(const DisturbanceSpec& spec, Eigen::VectorXd& value,
                       const SeedPlan& plan, int episode, int step);

struct ChannelDist {
  enum class Kind { None, Uniform, Gaussian };
  Kind kind = Kind::None;
  double lo = 0.0, hi = 0.0;  // Uniform: additive offset range
  double mu = 0.0, sigma = 0.0;  // Gaussian: additive offset
};

struct RandomizationSpec {
  std::vector<ChannelDist> x0_dist;  // per state channel; empty = none
  // Additive offsets on inertial parameters, keyed by parameter name order
  // of the system (cart-pole: m_c, m_p, l; quad: m, I_yy).
  std::vector<ChannelDist> param_dist;
  double prior_scaling = 1.0;
};

Eigen::VectorXd sample_initial_state(const RandomizationSpec& spec,
                                     const Eigen::VectorXd& nominal_x0,
                                     const SeedPlan& plan, int episode);

/// Samples additive offsets for the listed inertial parameters; values are
/// resampled (up to 100 tries) until nominal + offset stays positive.
/// Throws DegenerateDistributionError when positivity cannot be met.
std::vector<double> sample_param_offsets(const RandomizationSpec& spec,
                                         const std::vector<double>& nominal,
                                         const SeedPlan& plan, int episode);

}  // namespace safectl::disturbances
