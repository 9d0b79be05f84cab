#include "safectl/envs/trajectory.hpp"

#include <cmath>

#include "safectl/errors.hpp"

namespace safectl::envs {

namespace {

struct PlanarPoint {
  double px, pz, vx, vz;
};

// Square traversal: centered side-`s` square, perimeter time T, constant
// speed per edge with velocity ramps over `f` of each edge duration.
void square_edge(double s, double Te, double f, double tau, double& d, double& v) {
  const double vmax = s / (Te * (1.0 - f));
  const double tr = f * Te;
  if (tau <= tr) {
    v = vmax * tau / tr;
    d = 0.5 * vmax * tau * tau / tr;
  } else if (tau < Te - tr) {
    v = vmax;
    d = vmax * (tau - 0.5 * tr);
  } else {
    const double rem = Te - tau;
    v = vmax * rem / tr;
    d = s - 0.5 * vmax * rem * rem / tr;
  }
}

PlanarPoint planar(const TrajectoryConfig& cfg, double t) {
  const double s = cfg.scale;
  const double w = 2.0 * M_PI / cfg.period;
  PlanarPoint p{};
  switch (cfg.shape) {
    case TrajShape::Circle:
      // Starts at the bottom of the circle centered at (0, z_offset).
      p.px = s * std::sin(w * t);
      p.pz = cfg.z_offset - s * std::cos(w * t);
      p.vx = s * w * std::cos(w * t);
      p.vz = s * w * std::sin(w * t);
      break;
    case TrajShape::Sine:
      p.px = s * std::sin(w * t);
      p.pz = cfg.z_offset;
      p.vx = s * w * std::cos(w * t);
      p.vz = 0.0;
      break;
    case TrajShape::Lemniscate:
      // Gerono: self-intersects at t = period/2.
      p.px = s * std::sin(w * t);
      p.pz = cfg.z_offset + s * std::sin(w * t) * std::cos(w * t);
      p.vx = s * w * std::cos(w * t);
      p.vz = s * w * std::cos(2.0 * w * t);
      break;
    case TrajShape::Square: {
      const double Te = cfg.period / 4.0;
      const double f = 0.05;
      double tmod = std::fmod(t, cfg.period);
      if (tmod < 0) tmod += cfg.period;
      const int edge = std::min(3, static_cast<int>(tmod / Te));
      double d, v;
      square_edge(s, Te, f, tmod - edge * Te, d, v);
      const double h = s / 2.0;
      switch (edge) {
        case 0:  // bottom, +x
          p.px = -h + d; p.pz = cfg.z_offset - h; p.vx = v; p.vz = 0;
          break;
        case 1:  // right, +z
          p.px = h; p.pz = cfg.z_offset - h + d; p.vx = 0; p.vz = v;
          break;
        case 2:  // top, -x
          p.px = h - d; p.pz = cfg.z_offset + h; p.vx = -v; p.vz = 0;
          break;
        default:  // left, -z
          p.px = -h; p.pz = cfg.z_offset + h - d; p.vx = 0; p.vz = -v;
          break;
      }
      break;
    }
  }
  return p;
}

}  // namespace

ReferenceTrajectory generate_trajectory(const TrajectoryConfig& cfg, int length, double dt,
                                        const dynamics::DynamicsModel& model) {
  if (!(cfg.scale > 0) || !(cfg.period > 0))
    throw DimensionError("generate_trajectory: scale and period must be positive");

  ReferenceTrajectory out;
  out.x_ref.reserve(length + 1);
  out.u_ref.assign(length, model.equilibrium_input());

  for (int i = 0; i <= length; ++i) {
    const double t = i * dt;
    PlanarPoint p = planar(cfg, t);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(model.nx());
    switch (model.id()) {
      case dynamics::SystemId::CartPole:
        x(0) = p.px;
        x(1) = p.vx;
        break;
      case dynamics::SystemId::Quad1D:
        if (cfg.shape == TrajShape::Sine) {
          // The 1D system's axis is vertical; put the sine in z.
          const double w = 2.0 * M_PI / cfg.period;
          x(0) = cfg.z_offset + cfg.scale * std::sin(w * t);
          x(1) = cfg.scale * w * std::cos(w * t);
        } else {
          x(0) = p.pz;
          x(1) = p.vz;
        }
        break;
      case dynamics::SystemId::Quad2D:
        x(0) = p.px;
        x(1) = p.vx;
        x(2) = p.pz;
        x(3) = p.vz;
        break;
    }
    out.x_ref.push_back(std::move(x));
  }
  return out;
}

}  // namespace safectl::envs
