#include "signidd/disentangle.hpp"

#include <cmath>
#include <stdexcept>

namespace signidd {

Pose4D disentangle(const Pose3D& pose, const SkeletonTopology& topo) {
    if (pose.joint_count() != topo.joint_count())
        throw std::invalid_argument("disentangle: pose has " + std::to_string(pose.joint_count()) +
                                    " joints, topology expects " + std::to_string(topo.joint_count()));
    Pose4D out;
    out.rows.assign(pose.joints.size(), Bone4{0.0, 0.0, 0.0, 0.0});
    for (int child = 0; child < topo.joint_count(); ++child) {
        if (child == topo.root) continue;
        const Vec3& c = pose.joints[static_cast<size_t>(child)];
        const Vec3& p = pose.joints[static_cast<size_t>(topo.parents[child])];
        const double dx = c[0] - p[0];
        const double dy = c[1] - p[1];
        const double dz = c[2] - p[2];
        const double len = std::sqrt(dx * dx + dy * dy + dz * dz);
        if (len < kDegenerateBoneLength) continue;  // row stays (0,0,0,0)
        out.rows[static_cast<size_t>(child)] = {dx / len, dy / len, dz / len, len};
    }
    return out;
}

Pose3D reassemble(const Pose4D& attrs, const Vec3& root_position, const SkeletonTopology& topo) {
    if (attrs.joint_count() != topo.joint_count())
        throw std::invalid_argument("reassemble: attrs joint count mismatch");
    Pose3D out;
    out.joints.assign(attrs.rows.size(), Vec3{0.0, 0.0, 0.0});
    for (int joint : topological_order(topo)) {
        if (joint == topo.root) {
            out.joints[static_cast<size_t>(joint)] = root_position;
            continue;
        }
        const Vec3& p = out.joints[static_cast<size_t>(topo.parents[joint])];
        const Bone4& a = attrs.rows[static_cast<size_t>(joint)];
        out.joints[static_cast<size_t>(joint)] = {p[0] + a[3] * a[0], p[1] + a[3] * a[1], p[2] + a[3] * a[2]};
    }
    return out;
}

Fused7D fuse(const Pose3D& pose, const Pose4D& attrs) {
    if (pose.joint_count() != attrs.joint_count())
        throw std::invalid_argument("fuse: joint count mismatch (" + std::to_string(pose.joint_count()) + " vs " +
                                    std::to_string(attrs.joint_count()) + ")");
    Fused7D out;
    out.rows.resize(pose.joints.size());
    for (size_t j = 0; j < pose.joints.size(); ++j) {
        const Vec3& c = pose.joints[j];
        const Bone4& a = attrs.rows[j];
        out.rows[j] = {c[0], c[1], c[2], a[0], a[1], a[2], a[3]};
    }
    return out;
}

std::pair<Pose3D, Pose4D> split(const Fused7D& fused) {
    Pose3D pose;
    Pose4D attrs;
    pose.joints.resize(fused.rows.size());
    attrs.rows.resize(fused.rows.size());
    for (size_t j = 0; j < fused.rows.size(); ++j) {
        const auto& r = fused.rows[j];
        pose.joints[j] = {r[0], r[1], r[2]};
        attrs.rows[j] = {r[3], r[4], r[5], r[6]};
    }
    return {pose, attrs};
}

}  // namespace signidd
