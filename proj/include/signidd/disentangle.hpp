#pragma once

#include <utility>

#include "signidd/skeleton.hpp"

namespace signidd {

// Per-joint bone attributes: unit direction (x, y, z) from parent to child
// plus the bone length. The root row is all zeros.
using Bone4 = std::array<double, 4>;

struct Pose4D {
    std::vector<Bone4> rows;

    int joint_count() const { return static_cast<int>(rows.size()); }
};

// Row-wise concatenation of a Pose3D and its Pose4D (columns 0-2 coords,
// columns 3-6 bone attributes).
struct Fused7D {
    std::vector<std::array<double, 7>> rows;

    int joint_count() const { return static_cast<int>(rows.size()); }
};

// Bones shorter than this map to the degenerate row (0,0,0,0); keeps the
// transform NaN-free for coincident joints and the gradient bounded.
inline constexpr double kDegenerateBoneLength = 1e-12;

// 3D joints -> 4D bone attributes (unit parent->child direction + length).
Pose4D disentangle(const Pose3D& pose, const SkeletonTopology& topo);

// Inverse: place the root, then each child at parent + length * direction in
// topological order. Exact for outputs of disentangle.
Pose3D reassemble(const Pose4D& attrs, const Vec3& root_position, const SkeletonTopology& topo);

Fused7D fuse(const Pose3D& pose, const Pose4D& attrs);
std::pair<Pose3D, Pose4D> split(const Fused7D& fused);

}  // namespace signidd
