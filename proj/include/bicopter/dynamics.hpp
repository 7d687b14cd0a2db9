#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace bicopter {

inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 2;

// Canonical state ordering [r1, v1, r2, v2, psi, omega]. Every module and
// every file format indexes states this way. psi is stored unwrapped; it
// accumulates through a flip (wrapping happens only where memberships are
// evaluated, see fuzzy.hpp).
using State = Eigen::Matrix<double, kStateDim, 1>;

// Input ordering [uT, uR]: normalized thrust f_T/m (m/s^2) and normalized
// torque tau/J (rad/s^2).
using Input = Eigen::Matrix<double, kInputDim, 1>;

using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

enum StateIndex : int { kR1 = 0, kV1, kR2, kV2, kPsi, kOmega };
enum InputIndex : int { kUT = 0, kUR };

// Mass and inertia never enter the normalized dynamics; they only
// de-normalize uT, uR into f_T = m*uT and tau = J*uR for reporting.
struct PlantParams {
  double g = 9.81;  // m/s^2
  double m = 1.0;   // kg
  double J = 1.0;   // kg*m^2
};

inline State deriv(const State& x, const Input& u, const PlantParams& p) {
  State dx;
  dx[kR1] = x[kV1];
  dx[kV1] = u[kUT] * std::sin(x[kPsi]);
  dx[kR2] = x[kV2];
  dx[kV2] = u[kUT] * std::cos(x[kPsi]) - p.g;
  dx[kPsi] = x[kOmega];
  dx[kOmega] = u[kUR];
  return dx;
}

// A = df/dx, B = df/du, evaluated analytically.
inline void jacobians(const State& x, const Input& u, const PlantParams&,
                      StateJacobian& A, InputJacobian& B) {
  const double s = std::sin(x[kPsi]);
  const double c = std::cos(x[kPsi]);
  A.setZero();
  A(kR1, kV1) = 1.0;
  A(kR2, kV2) = 1.0;
  A(kPsi, kOmega) = 1.0;
  A(kV1, kPsi) = u[kUT] * c;
  A(kV2, kPsi) = -u[kUT] * s;
  B.setZero();
  B(kV1, kUT) = s;
  B(kV2, kUT) = c;
  B(kOmega, kUR) = 1.0;
}

// Explicit Euler step, exactly the map used by the transcription defects.
inline State euler_step(const State& x, const Input& u, double dt,
                        const PlantParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be positive");
  return x + dt * deriv(x, u, p);
}

// Classical RK4 step with the input held constant (zero-order hold).
inline State rk4_step(const State& x, const Input& u, double dt,
                      const PlantParams& p) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const State k1 = deriv(x, u, p);
  const State k2 = deriv(x + (0.5 * dt) * k1, u, p);
  const State k3 = deriv(x + (0.5 * dt) * k2, u, p);
  const State k4 = deriv(x + dt * k3, u, p);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline State hover_state(double r1 = 0.0, double r2 = 0.0) {
  State x = State::Zero();
  x[kR1] = r1;
  x[kR2] = r2;
  return x;
}

inline Input hover_input(const PlantParams& p) { return Input(p.g, 0.0); }

}  // namespace bicopter
