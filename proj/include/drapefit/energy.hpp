#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "drapefit/collider.hpp"
#include "drapefit/params.hpp"
#include "drapefit/rest_state.hpp"
#include "drapefit/types.hpp"

namespace drapefit {

using SparseMat = Eigen::SparseMatrix<Real>;
using Triplet = Eigen::Triplet<Real>;

// Scalar energies (J) with per-vertex gradients (N), one slot per term.
struct EnergyTerms {
  Real membrane = 0.0, bending = 0.0, gravity = 0.0, contact = 0.0;
  MatX3 membrane_grad, bending_grad, gravity_grad, contact_grad;

  Real total() const { return membrane + bending + gravity + contact; }
};

// Isotropic StVK membrane: E = sum_f A_f h Psi(F), F = Ds Dm^-1,
// Green strain G = (F^T F - I)/2, Psi = mu |G|_F^2 + lambda/2 tr(G)^2,
// mu/lambda from Y = kappa_s * Y_base under plane stress.
// Throws SingularElementError when a current triangle has area < 1e-14.
Real membrane_energy_grad(const MatX3& positions, const RestState& rest,
                          Real kappa_s, MatX3& grad);

// Discrete-shell hinge bending: E = kappa_b k_base sum_e (theta - rest)^2 |e|/h_e.
// Throws SingularElementError when an incident face collapses.
Real bending_energy_grad(const MatX3& positions, const RestState& rest,
                         Real kappa_b, MatX3& grad);

// E = -sum_i m_i g . x_i, gradient entry i is -m_i g.
Real gravity_energy_grad(const MatX3& positions, const RestState& rest, MatX3& grad);

// Log-barrier contact against analytic colliders:
// b(d) = -kc (d - dhat)^2 ln(d/dhat) for 0 < d < dhat, 0 beyond dhat.
// Throws PenetrationError when any vertex has d <= 0 on entry.
Real contact_energy_grad(const MatX3& positions, const std::vector<Primitive>& prims,
                         MatX3& grad);

// All four terms at once; `with_gravity` lets the integrator run
// gravity-free setups (conservation tests, kinematic-only scenes).
EnergyTerms evaluate_energies(const MatX3& positions, const RestState& rest,
                              const PhysicsParams& params,
                              const std::vector<Primitive>& prims,
                              bool with_gravity = true);

// Value-only total, nullable for line-search filtering: returns false
// (instead of throwing) on collapsed elements or collider penetration.
bool total_energy_value(const MatX3& positions, const RestState& rest,
                        const PhysicsParams& params,
                        const std::vector<Primitive>& prims, Real& energy,
                        bool with_gravity = true);

// Newton Hessian contributions, appended as triplets on the full 3n dof
// numbering. Element blocks are projected to PSD: membrane by eigenvalue
// clamping of d2Psi/dF2, bending by the Gauss-Newton outer product,
// contact by 3x3 eigenvalue clamping.
void append_hessian_triplets(const MatX3& positions, const RestState& rest,
                             const PhysicsParams& params,
                             const std::vector<Primitive>& prims,
                             std::vector<Triplet>& triplets);

// Barrier profile, exposed for tests: value, first, second derivative in d.
Real contact_barrier(Real d);
Real contact_barrier_d(Real d);
Real contact_barrier_dd(Real d);

} // namespace drapefit
