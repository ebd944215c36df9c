#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace signidd {

using Vec3 = std::array<double, 3>;

// Joint tree shared by every other module. parents[root] == root; all other
// joints reach the root by following parents. Immutable after load.
struct SkeletonTopology {
    std::vector<std::string> joint_names;
    std::vector<int> parents;
    int root = 0;

    int joint_count() const { return static_cast<int>(joint_names.size()); }
    int bone_count() const { return joint_count() - 1; }
};

// Joint coordinates of a single frame, indexed like the topology.
struct Pose3D {
    std::vector<Vec3> joints;

    int joint_count() const { return static_cast<int>(joints.size()); }
};

// Throws std::runtime_error naming the first violated invariant (cycle,
// multiple/zero roots, parent index out of range, root mismatch).
void validate_topology(const SkeletonTopology& topo);

// Topology file: UTF-8 JSON {"joints": [...], "parents": [...], "root": n}.
SkeletonTopology load_topology(const std::string& path);
void save_topology(const SkeletonTopology& topo, const std::string& path);

// One (parent, child) pair per non-root joint, ordered by child index.
std::vector<std::pair<int, int>> bone_endpoints(const SkeletonTopology& topo);

// Joint indices ordered so parents precede children; root first.
std::vector<int> topological_order(const SkeletonTopology& topo);

// Shipped presets: "toy8" (neck, head, 2x shoulder/elbow/wrist) and "upper50"
// (upper body plus two 21-joint hands). The paper never fixes J, so presets
// are configuration.
bool is_preset_topology(const std::string& name);
SkeletonTopology preset_topology(const std::string& name);

// Deterministic rest pose for a preset, scaled so the skeleton's height
// (y extent) is exactly 1 model unit. Drives the synthetic corpus.
Pose3D preset_rest_pose(const std::string& name);

}  // namespace signidd
