#pragma once

#include <string>
#include <variant>
#include <vector>

#include "drapefit/types.hpp"

namespace drapefit {

struct Sphere {
  Vec3 center = Vec3::Zero();
  Real radius = 0.0;
};

struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  Real radius = 0.0;
};

// Solid occupies the side the normal points away from: signed distance is
// normal . (p - point), negative inside.
struct HalfSpace {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitY();
};

using Primitive = std::variant<Sphere, Capsule, HalfSpace>;

struct RigidTransform {
  Quat rotation = Quat::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
};

// One analytic body collider with an optional per-frame rigid track.
// An empty track means the primitive is static.
struct ColliderBody {
  Primitive shape;
  std::vector<RigidTransform> track;

  RigidTransform at_frame(int frame) const;
};

struct ColliderSet {
  std::vector<ColliderBody> bodies;

  bool empty() const { return bodies.empty(); }
  // Primitives with their frame transform baked in.
  std::vector<Primitive> at_frame(int frame) const;
  // Throws ValidationError on zero radii, coincident capsule endpoints,
  // or non-unit half-space normals.
  void validate() const;
};

// Signed distance to the primitive surface (negative inside), its spatial
// gradient, and a PSD-safe curvature term for Newton assembly.
Real collider_distance(const Vec3& p, const Primitive& prim);
Real collider_distance(const Vec3& p, const Primitive& prim, Vec3& grad);
Real collider_distance(const Vec3& p, const Primitive& prim, Vec3& grad, Mat3& hess);

Primitive transform_primitive(const Primitive& prim, const RigidTransform& xf);

// Minimum distance from any vertex to any primitive; +inf when the set is empty.
Real min_collider_distance(const MatX3& positions, const std::vector<Primitive>& prims);

// Structured text config:
//   collider <sphere|capsule|halfspace>
//   <param lines: center/radius, a/b/radius, point/normal>
//   frame <index> <qw> <qx> <qy> <qz> <tx> <ty> <tz>   (optional track)
//   end
ColliderSet load_collider_config(const std::string& path);
void save_collider_config(const std::string& path, const ColliderSet& set);

} // namespace drapefit
