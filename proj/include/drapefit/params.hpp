#pragma once

#include <string>

#include "drapefit/types.hpp"

namespace drapefit {

// Physical constants of the material mapping. The stiffness scales kappa_s
// and kappa_b are dimensionless multipliers on these bases, so that the
// legal density range yields realistic fabric areal densities.
namespace material {
constexpr Real kYoungBase = 1e5;     // Pa, membrane base modulus
constexpr Real kPoisson = 0.3;       // plane stress
constexpr Real kThickness = 3e-4;    // m, shell thickness
constexpr Real kBendBase = 1e-4;     // N*m, bending base stiffness
constexpr Real kGravityY = -9.8;     // m/s^2
constexpr Real kContactDhat = 1e-3;  // m, barrier activation distance
constexpr Real kContactStiff = 1e3;  // barrier stiffness
} // namespace material

inline Vec3 gravity_vector() { return Vec3(0.0, material::kGravityY, 0.0); }

// The estimated triple. Legal ranges: rho in [200, 640] kg/m^3, kappa_s and
// kappa_b each in [0.1, 8].
struct PhysicsParams {
  Real rho = 400.0;
  Real kappa_s = 1.0;
  Real kappa_b = 1.0;

  static constexpr Real kRhoMin = 200.0, kRhoMax = 640.0;
  static constexpr Real kKappaMin = 0.1, kKappaMax = 8.0;

  bool in_range() const {
    return rho >= kRhoMin && rho <= kRhoMax && kappa_s >= kKappaMin &&
           kappa_s <= kKappaMax && kappa_b >= kKappaMin && kappa_b <= kKappaMax;
  }

  PhysicsParams clamped() const {
    PhysicsParams p = *this;
    p.rho = std::min(std::max(p.rho, kRhoMin), kRhoMax);
    p.kappa_s = std::min(std::max(p.kappa_s, kKappaMin), kKappaMax);
    p.kappa_b = std::min(std::max(p.kappa_b, kKappaMin), kKappaMax);
    return p;
  }

  std::string describe() const;
};

// Throws ValidationError when params are outside their legal ranges.
void require_in_range(const PhysicsParams& params);

} // namespace drapefit
