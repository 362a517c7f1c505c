#include "drapefit/energy.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "drapefit/error.hpp"
#include "drapefit/parallel.hpp"

namespace drapefit {

namespace {

struct Lame {
  Real mu;
  Real lambda;
};

Lame lame_from_kappa(Real kappa_s) {
  const Real young = kappa_s * material::kYoungBase;
  return {young / (2.0 * (1.0 + material::kPoisson)),
          young * material::kPoisson / (1.0 - material::kPoisson * material::kPoisson)};
}

Real stvk_psi(const Mat32& F, const Lame& lame) {
  const Mat2 green = 0.5 * (F.transpose() * F - Mat2::Identity());
  const Real tr = green.trace();
  return lame.mu * green.squaredNorm() + 0.5 * lame.lambda * tr * tr;
}

// First Piola-Kirchhoff stress P = F (2 mu E + lambda tr(E) I).
Mat32 stvk_pk1(const Mat32& F, const Lame& lame) {
  const Mat2 green = 0.5 * (F.transpose() * F - Mat2::Identity());
  const Mat2 second =
      2.0 * lame.mu * green + lame.lambda * green.trace() * Mat2::Identity();
  return F * second;
}

// d2Psi/dF2 as a 6x6 in vec(F) (column-major), assembled by applying the
// differential to the six basis directions.
Mat66 stvk_hessian_F(const Mat32& F, const Lame& lame) {
  const Mat2 green = 0.5 * (F.transpose() * F - Mat2::Identity());
  const Mat2 second =
      2.0 * lame.mu * green + lame.lambda * green.trace() * Mat2::Identity();
  Mat66 H;
  for (int a = 0; a < 6; ++a) {
    Mat32 dF = Mat32::Zero();
    dF(a % 3, a / 3) = 1.0;
    const Mat2 dE = 0.5 * (dF.transpose() * F + F.transpose() * dF);
    const Mat2 dS = 2.0 * lame.mu * dE + lame.lambda * dE.trace() * Mat2::Identity();
    const Mat32 dP = dF * second + F * dS;
    H.col(a) = Eigen::Map<const Vec6>(dP.data());
  }
  return 0.5 * (H + H.transpose());
}

// Maps the stencil (x0,x1,x2) to vec(F) through F = Ds Dm^-1.
Eigen::Matrix<Real, 6, 9> deformation_jacobian(const Mat2& dm_inv) {
  Eigen::Matrix<Real, 6, 9> G = Eigen::Matrix<Real, 6, 9>::Zero();
  for (int c = 0; c < 2; ++c) {
    for (int r = 0; r < 3; ++r) {
      const int a = c * 3 + r;
      G(a, 3 + r) = dm_inv(0, c);
      G(a, 6 + r) = dm_inv(1, c);
      G(a, r) = -dm_inv(0, c) - dm_inv(1, c);
    }
  }
  return G;
}

template <int N>
void clamp_to_psd(Eigen::Matrix<Real, N, N>& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Real, N, N>> eig(M);
  Eigen::Matrix<Real, N, 1> vals = eig.eigenvalues().cwiseMax(0.0);
  M = eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

void check_finite(const MatX3& positions) {
  if (!positions.allFinite()) throw NumericError("non-finite vertex positions");
}

[[noreturn]] void throw_singular_face(Index f, Real area) {
  std::ostringstream ss;
  ss << "face " << f << " collapsed (current area " << area << ")";
  throw SingularElementError(ss.str());
}

Mat32 edge_matrix(const MatX3& x, const MatX3i& faces, Index f) {
  Mat32 ds;
  const Vec3 x0 = x.row(faces(f, 0));
  ds.col(0) = Vec3(x.row(faces(f, 1))) - x0;
  ds.col(1) = Vec3(x.row(faces(f, 2))) - x0;
  return ds;
}

struct HingeEval {
  Real angle = 0.0;
  Vec3 grad[4];
  bool degenerate = false;
};

HingeEval eval_hinge(const MatX3& x, const Hinge& h, bool with_grad) {
  HingeEval out;
  const Vec3 xi = x.row(h.i), xj = x.row(h.j), xk = x.row(h.k), xl = x.row(h.l);
  const Vec3 e = xj - xi;
  const Real a1 = 0.5 * e.cross(Vec3(xk - xi)).norm();
  const Real a2 = 0.5 * Vec3(xi - xj).cross(Vec3(xl - xj)).norm();
  if (a1 < kMinLiveArea || a2 < kMinLiveArea || e.squaredNorm() < 1e-28) {
    out.degenerate = true;
    return out;
  }
  out.angle = dihedral_angle(xi, xj, xk, xl);
  if (with_grad) dihedral_angle_gradient(xi, xj, xk, xl, out.grad);
  return out;
}

} // namespace

Real membrane_energy_grad(const MatX3& positions, const RestState& rest,
                          Real kappa_s, MatX3& grad) {
  check_finite(positions);
  const Lame lame = lame_from_kappa(kappa_s);
  const Real h = rest.thickness;
  const Index m = rest.num_faces();
  grad.setZero(positions.rows(), 3);

  VecX energies(m);
  std::vector<Eigen::Matrix<Real, 3, 3>> face_grads(m); // columns: x0,x1,x2
  std::vector<Index> bad(m, -1);

  parallel_for(m, [&](long f) {
    const Real area = face_area(positions, rest.faces, f);
    if (area < kMinLiveArea) {
      bad[f] = f;
      energies[f] = 0.0;
      face_grads[f].setZero();
      return;
    }
    const Mat32 F = edge_matrix(positions, rest.faces, f) * rest.dm_inv[f];
    const Real coef = rest.face_area[f] * h;
    energies[f] = coef * stvk_psi(F, lame);
    const Mat32 dpsi_dDs = stvk_pk1(F, lame) * rest.dm_inv[f].transpose();
    Eigen::Matrix<Real, 3, 3>& g = face_grads[f];
    g.col(1) = coef * dpsi_dDs.col(0);
    g.col(2) = coef * dpsi_dDs.col(1);
    g.col(0) = -g.col(1) - g.col(2);
  });

  Real total = 0.0;
  for (Index f = 0; f < m; ++f) {
    if (bad[f] >= 0) throw_singular_face(f, face_area(positions, rest.faces, f));
    total += energies[f];
    for (int c = 0; c < 3; ++c)
      grad.row(rest.faces(f, c)) += face_grads[f].col(c);
  }
  return total;
}

Real bending_energy_grad(const MatX3& positions, const RestState& rest,
                         Real kappa_b, MatX3& grad) {
  check_finite(positions);
  const Real stiffness = kappa_b * material::kBendBase;
  const Index nh = static_cast<Index>(rest.hinges.size());
  grad.setZero(positions.rows(), 3);

  VecX energies(nh);
  std::vector<HingeEval> evals(nh);

  parallel_for(nh, [&](long e) {
    const Hinge& hinge = rest.hinges[e];
    evals[e] = eval_hinge(positions, hinge, true);
    if (evals[e].degenerate) {
      energies[e] = 0.0;
      return;
    }
    const Real w = stiffness * hinge.rest_length / hinge.rest_height;
    const Real dev = evals[e].angle - hinge.rest_angle;
    energies[e] = w * dev * dev;
  });

  Real total = 0.0;
  for (Index e = 0; e < nh; ++e) {
    const Hinge& hinge = rest.hinges[e];
    if (evals[e].degenerate) {
      std::ostringstream ss;
      ss << "hinge over edge (" << hinge.i << "," << hinge.j << ") has a collapsed face";
      throw SingularElementError(ss.str());
    }
    total += energies[e];
    const Real w = stiffness * hinge.rest_length / hinge.rest_height;
    const Real scale = 2.0 * w * (evals[e].angle - hinge.rest_angle);
    const int verts[4] = {hinge.i, hinge.j, hinge.k, hinge.l};
    for (int c = 0; c < 4; ++c)
      grad.row(verts[c]) += scale * evals[e].grad[c];
  }
  return total;
}

Real gravity_energy_grad(const MatX3& positions, const RestState& rest, MatX3& grad) {
  check_finite(positions);
  const Vec3 g = gravity_vector();
  grad.resize(positions.rows(), 3);
  Real total = 0.0;
  for (Index i = 0; i < positions.rows(); ++i) {
    total -= rest.vertex_mass[i] * g.dot(positions.row(i));
    grad.row(i) = -rest.vertex_mass[i] * g;
  }
  return total;
}

Real contact_barrier(Real d) {
  const Real dhat = material::kContactDhat;
  if (d >= dhat) return 0.0;
  const Real gap = d - dhat;
  return -material::kContactStiff * gap * gap * std::log(d / dhat);
}

Real contact_barrier_d(Real d) {
  const Real dhat = material::kContactDhat;
  if (d >= dhat) return 0.0;
  const Real gap = d - dhat;
  return -material::kContactStiff * (2.0 * gap * std::log(d / dhat) + gap * gap / d);
}

Real contact_barrier_dd(Real d) {
  const Real dhat = material::kContactDhat;
  if (d >= dhat) return 0.0;
  const Real gap = d - dhat;
  return -material::kContactStiff *
         (2.0 * std::log(d / dhat) + 4.0 * gap / d - gap * gap / (d * d));
}

Real contact_energy_grad(const MatX3& positions, const std::vector<Primitive>& prims,
                         MatX3& grad) {
  check_finite(positions);
  grad.setZero(positions.rows(), 3);
  Real total = 0.0;
  for (const auto& prim : prims) {
    for (Index i = 0; i < positions.rows(); ++i) {
      Vec3 dgrad;
      const Real d = collider_distance(positions.row(i), prim, dgrad);
      if (d <= 0.0) {
        std::ostringstream ss;
        ss << "vertex " << i << " penetrates a collider (distance " << d << ")";
        throw PenetrationError(ss.str());
      }
      if (d >= material::kContactDhat) continue;
      total += contact_barrier(d);
      grad.row(i) += contact_barrier_d(d) * dgrad;
    }
  }
  return total;
}

EnergyTerms evaluate_energies(const MatX3& positions, const RestState& rest,
                              const PhysicsParams& params,
                              const std::vector<Primitive>& prims, bool with_gravity) {
  EnergyTerms terms;
  terms.membrane = membrane_energy_grad(positions, rest, params.kappa_s, terms.membrane_grad);
  terms.bending = bending_energy_grad(positions, rest, params.kappa_b, terms.bending_grad);
  if (with_gravity) {
    terms.gravity = gravity_energy_grad(positions, rest, terms.gravity_grad);
  } else {
    terms.gravity_grad.setZero(positions.rows(), 3);
  }
  terms.contact = contact_energy_grad(positions, prims, terms.contact_grad);
  return terms;
}

bool total_energy_value(const MatX3& positions, const RestState& rest,
                        const PhysicsParams& params,
                        const std::vector<Primitive>& prims, Real& energy,
                        bool with_gravity) {
  if (!positions.allFinite()) return false;
  const Lame lame = lame_from_kappa(params.kappa_s);
  Real total = 0.0;

  for (Index f = 0; f < rest.num_faces(); ++f) {
    if (face_area(positions, rest.faces, f) < kMinLiveArea) return false;
    const Mat32 F = edge_matrix(positions, rest.faces, f) * rest.dm_inv[f];
    total += rest.face_area[f] * rest.thickness * stvk_psi(F, lame);
  }

  const Real bend_stiff = params.kappa_b * material::kBendBase;
  for (const auto& hinge : rest.hinges) {
    const HingeEval he = eval_hinge(positions, hinge, false);
    if (he.degenerate) return false;
    const Real dev = he.angle - hinge.rest_angle;
    total += bend_stiff * hinge.rest_length / hinge.rest_height * dev * dev;
  }

  if (with_gravity) {
    const Vec3 g = gravity_vector();
    for (Index i = 0; i < positions.rows(); ++i)
      total -= rest.vertex_mass[i] * g.dot(positions.row(i));
  }

  for (const auto& prim : prims) {
    for (Index i = 0; i < positions.rows(); ++i) {
      const Real d = collider_distance(positions.row(i), prim);
      if (d <= 0.0) return false;
      total += contact_barrier(d);
    }
  }
  energy = total;
  return true;
}

void append_hessian_triplets(const MatX3& positions, const RestState& rest,
                             const PhysicsParams& params,
                             const std::vector<Primitive>& prims,
                             std::vector<Triplet>& triplets) {
  const Lame lame = lame_from_kappa(params.kappa_s);
  const Index m = rest.num_faces();
  const Index nh = static_cast<Index>(rest.hinges.size());

  // Membrane: A h G^T (clamped d2Psi/dF2) G per face.
  std::vector<Mat99> face_blocks(m);
  parallel_for(m, [&](long f) {
    const Mat32 F = edge_matrix(positions, rest.faces, f) * rest.dm_inv[f];
    Mat66 HF = stvk_hessian_F(F, lame);
    clamp_to_psd<6>(HF);
    const auto G = deformation_jacobian(rest.dm_inv[f]);
    face_blocks[f] = rest.face_area[f] * rest.thickness * (G.transpose() * HF * G);
  });
  for (Index f = 0; f < m; ++f) {
    const int v[3] = {rest.faces(f, 0), rest.faces(f, 1), rest.faces(f, 2)};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            triplets.emplace_back(3 * v[a] + r, 3 * v[b] + c,
                                  face_blocks[f](3 * a + r, 3 * b + c));
  }

  // Bending: Gauss-Newton outer product 2 w grad(theta) grad(theta)^T.
  const Real bend_stiff = params.kappa_b * material::kBendBase;
  std::vector<Eigen::Matrix<Real, 12, 12>> hinge_blocks(nh);
  parallel_for(nh, [&](long e) {
    const Hinge& hinge = rest.hinges[e];
    const HingeEval he = eval_hinge(positions, hinge, true);
    if (he.degenerate) {
      hinge_blocks[e].setZero();
      return;
    }
    Eigen::Matrix<Real, 12, 1> dtheta;
    for (int c = 0; c < 4; ++c) dtheta.segment<3>(3 * c) = he.grad[c];
    const Real w = bend_stiff * hinge.rest_length / hinge.rest_height;
    hinge_blocks[e] = 2.0 * w * (dtheta * dtheta.transpose());
  });
  for (Index e = 0; e < nh; ++e) {
    const Hinge& hinge = rest.hinges[e];
    const int v[4] = {hinge.i, hinge.j, hinge.k, hinge.l};
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c)
            triplets.emplace_back(3 * v[a] + r, 3 * v[b] + c,
                                  hinge_blocks[e](3 * a + r, 3 * b + c));
  }

  // Contact: per vertex-primitive pair, clamped 3x3 block.
  for (const auto& prim : prims) {
    for (Index i = 0; i < positions.rows(); ++i) {
      Vec3 dgrad;
      Mat3 dhess;
      const Real d = collider_distance(positions.row(i), prim, dgrad, dhess);
      if (d >= material::kContactDhat || d <= 0.0) continue;
      Mat3 block = contact_barrier_dd(d) * (dgrad * dgrad.transpose()) +
                   contact_barrier_d(d) * dhess;
      clamp_to_psd<3>(block);
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          triplets.emplace_back(3 * i + r, 3 * i + c, block(r, c));
    }
  }
}

} // namespace drapefit
