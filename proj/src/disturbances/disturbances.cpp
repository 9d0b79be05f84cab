#include "safectl/disturbances/disturbances.hpp"

#include <cmath>

#include "safectl/errors.hpp"

namespace safectl::disturbances {

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t counter_hash(std::uint64_t master, std::uint64_t e, std::uint64_t s,
                           std::uint64_t stream, std::uint64_t ch, std::uint64_t idx) {
  std::uint64_t h = mix(master);
  h = mix(h ^ e);
  h = mix(h ^ s);
  h = mix(h ^ stream);
  h = mix(h ^ ch);
  h = mix(h ^ idx);
  return h;
}

}  // namespace

double SeedPlan::uniform01(std::uint64_t episode, std::uint64_t step, std::uint64_t stream,
                           std::uint64_t channel, std::uint64_t index) const {
  std::uint64_t h = counter_hash(master, episode, step, stream, channel, index);
  // 53 mantissa bits -> uniform in [0, 1)
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double SeedPlan::gaussian(std::uint64_t episode, std::uint64_t step, std::uint64_t stream,
                          std::uint64_t channel) const {
  double u1 = uniform01(episode, step, stream, channel, 0);
  double u2 = uniform01(episode, step, stream, channel, 1);
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void apply_disturbance(const DisturbanceSpec& spec, Eigen::VectorXd& value,
                       const SeedPlan& plan, int episode, int step) {
  const auto stream = static_cast<std::uint64_t>(spec.target);
  for (size_t i = 0; i < spec.channels.size(); ++i) {
    const int ch = spec.channels[i];
    if (ch < 0 || ch >= value.size())
      throw DimensionError("apply_disturbance: channel index out of range");
    switch (spec.kind) {
      case DisturbanceSpec::Kind::WhiteNoise:
        value(ch) += spec.sigma(static_cast<int>(i)) *
                     plan.gaussian(episode, step, stream, static_cast<std::uint64_t>(ch));
        break;
      case DisturbanceSpec::Kind::Step:
        if (step >= spec.onset_step) value(ch) += spec.magnitude(static_cast<int>(i));
        break;
      case DisturbanceSpec::Kind::Impulse:
        if (step == spec.onset_step) value(ch) += spec.magnitude(static_cast<int>(i));
        break;
    }
  }
}

namespace {

double sample_offset(const ChannelDist& d, const SeedPlan& plan, int episode,
                     std::uint64_t stream, int channel, int attempt) {
  switch (d.kind) {
    case ChannelDist::Kind::None:
      return 0.0;
    case ChannelDist::Kind::Uniform:
      return d.lo + (d.hi - d.lo) * plan.uniform01(episode, 0, stream, channel,
                                                   2 + static_cast<std::uint64_t>(attempt));
    case ChannelDist::Kind::Gaussian: {
      double u1 = plan.uniform01(episode, 0, stream, channel,
                                 2 + 2 * static_cast<std::uint64_t>(attempt));
      double u2 = plan.uniform01(episode, 0, stream, channel,
                                 3 + 2 * static_cast<std::uint64_t>(attempt));
      if (u1 <= 0.0) u1 = 0x1.0p-53;
      return d.mu + d.sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
  }
  return 0.0;
}

}  // namespace

Eigen::VectorXd sample_initial_state(const RandomizationSpec& spec,
                                     const Eigen::VectorXd& nominal_x0,
                                     const SeedPlan& plan, int episode) {
  Eigen::VectorXd x0 = nominal_x0;
  const auto stream = static_cast<std::uint64_t>(Stream::InitialState);
  for (size_t i = 0; i < spec.x0_dist.size() && i < static_cast<size_t>(x0.size()); ++i)
    x0(static_cast<int>(i)) +=
        sample_offset(spec.x0_dist[i], plan, episode, stream, static_cast<int>(i), 0);
  return x0;
}

std::vector<double> sample_param_offsets(const RandomizationSpec& spec,
                                         const std::vector<double>& nominal,
                                         const SeedPlan& plan, int episode) {
  const auto stream = static_cast<std::uint64_t>(Stream::Params);
  std::vector<double> offsets(nominal.size(), 0.0);
  for (size_t i = 0; i < spec.param_dist.size() && i < nominal.size(); ++i) {
    bool ok = false;
    for (int attempt = 0; attempt < 100; ++attempt) {
      double off = sample_offset(spec.param_dist[i], plan, episode, stream,
                                 static_cast<int>(i), attempt);
      if (nominal[i] + off > 0.0) {
        offsets[i] = off;
        ok = true;
        break;
      }
    }
    if (!ok)
      throw DegenerateDistributionError(
          "sample_param_offsets: positivity could not be met after 100 tries");
  }
  return offsets;
}

}  // namespace safectl::disturbances
