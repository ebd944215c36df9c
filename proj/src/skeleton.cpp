#include "signidd/skeleton.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace signidd {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

}  // namespace

void validate_topology(const SkeletonTopology& topo) {
    const int j = topo.joint_count();
    if (j < 1) fail("topology: at least one joint required");
    if (static_cast<int>(topo.parents.size()) != j)
        fail("topology: parents length " + std::to_string(topo.parents.size()) +
             " does not match joint count " + std::to_string(j));
    if (topo.root < 0 || topo.root >= j)
        fail("topology: root index " + std::to_string(topo.root) + " out of range");

    for (int i = 0; i < j; ++i) {
        if (topo.parents[i] < 0 || topo.parents[i] >= j)
            fail("topology: parent index out of range at joint " + std::to_string(i));
    }

    // Walk each joint toward a self-parent; more than J steps means a cycle.
    for (int i = 0; i < j; ++i) {
        int cur = i;
        int steps = 0;
        while (topo.parents[cur] != cur) {
            cur = topo.parents[cur];
            if (++steps > j) fail("topology: cycle detected at joint " + std::to_string(i));
        }
    }

    int root_count = 0;
    int found_root = -1;
    for (int i = 0; i < j; ++i) {
        if (topo.parents[i] == i) {
            ++root_count;
            found_root = i;
        }
    }
    if (root_count == 0) fail("topology: zero roots (no self-parented joint)");
    if (root_count > 1) fail("topology: multiple roots (" + std::to_string(root_count) + " self-parented joints)");
    if (found_root != topo.root)
        fail("topology: declared root " + std::to_string(topo.root) + " differs from self-parented joint " +
             std::to_string(found_root));
}

SkeletonTopology load_topology(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("topology: cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        fail("topology: parse failure in " + path + ": " + e.what());
    }
    SkeletonTopology topo;
    try {
        topo.joint_names = doc.at("joints").get<std::vector<std::string>>();
        topo.parents = doc.at("parents").get<std::vector<int>>();
        topo.root = doc.at("root").get<int>();
    } catch (const std::exception& e) {
        fail("topology: malformed document in " + path + ": " + e.what());
    }
    validate_topology(topo);
    return topo;
}

void save_topology(const SkeletonTopology& topo, const std::string& path) {
    nlohmann::json doc;
    doc["joints"] = topo.joint_names;
    doc["parents"] = topo.parents;
    doc["root"] = topo.root;
    std::ofstream out(path);
    if (!out) fail("topology: cannot write " + path);
    out << doc.dump(2) << "\n";
}

std::vector<std::pair<int, int>> bone_endpoints(const SkeletonTopology& topo) {
    std::vector<std::pair<int, int>> bones;
    bones.reserve(static_cast<size_t>(topo.bone_count()));
    for (int child = 0; child < topo.joint_count(); ++child) {
        if (child != topo.root) bones.emplace_back(topo.parents[child], child);
    }
    return bones;
}

std::vector<int> topological_order(const SkeletonTopology& topo) {
    const int j = topo.joint_count();
    std::vector<int> order;
    order.reserve(static_cast<size_t>(j));
    std::vector<char> placed(static_cast<size_t>(j), 0);
    order.push_back(topo.root);
    placed[static_cast<size_t>(topo.root)] = 1;
    // J passes suffice for any tree; typically far fewer.
    while (static_cast<int>(order.size()) < j) {
        bool progressed = false;
        for (int i = 0; i < j; ++i) {
            if (!placed[static_cast<size_t>(i)] && placed[static_cast<size_t>(topo.parents[i])]) {
                order.push_back(i);
                placed[static_cast<size_t>(i)] = 1;
                progressed = true;
            }
        }
        if (!progressed) fail("topology: unreachable joints (not a tree)");
    }
    return order;
}

bool is_preset_topology(const std::string& name) { return name == "toy8" || name == "upper50"; }

namespace {

SkeletonTopology make_toy8() {
    SkeletonTopology t;
    t.joint_names = {"neck", "head", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    t.parents = {0, 0, 0, 2, 3, 0, 5, 6};
    t.root = 0;
    return t;
}

// Upper body (8) + two OpenPose-style hands (21 each): palm root off the
// wrist plus five fingers of four segments.
SkeletonTopology make_upper50() {
    SkeletonTopology t;
    t.joint_names = {"neck", "nose", "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow", "r_wrist"};
    t.parents = {0, 0, 0, 2, 3, 0, 5, 6};
    t.root = 0;
    const char* side[2] = {"l", "r"};
    const int wrist_index[2] = {4, 7};
    const char* finger[5] = {"thumb", "index", "middle", "ring", "pinky"};
    for (int s = 0; s < 2; ++s) {
        const int palm = static_cast<int>(t.joint_names.size());
        t.joint_names.push_back(std::string(side[s]) + "_palm");
        t.parents.push_back(wrist_index[s]);
        for (int f = 0; f < 5; ++f) {
            int prev = palm;
            for (int seg = 0; seg < 4; ++seg) {
                t.joint_names.push_back(std::string(side[s]) + "_" + finger[f] + std::to_string(seg));
                t.parents.push_back(prev);
                prev = static_cast<int>(t.joint_names.size()) - 1;
            }
        }
    }
    return t;
}

Pose3D rest_toy8() {
    Pose3D p;
    p.joints = {
        {0.00, 0.00, 0.00},    // neck
        {0.00, 0.25, 0.00},    // head
        {-0.20, -0.05, 0.00},  // l_shoulder
        {-0.45, -0.30, 0.05},  // l_elbow
        {-0.65, -0.55, 0.10},  // l_wrist
        {0.20, -0.05, 0.00},   // r_shoulder
        {0.45, -0.30, 0.05},   // r_elbow
        {0.65, -0.55, 0.10},   // r_wrist
    };
    return p;
}

Pose3D rest_upper50() {
    Pose3D p;
    p.joints = {
        {0.00, 0.00, 0.00},    // neck
        {0.00, 0.25, 0.05},    // nose
        {-0.30, -0.05, 0.00},  // l_shoulder
        {-0.52, -0.35, 0.08},  // l_elbow
        {-0.62, -0.68, 0.16},  // l_wrist
        {0.30, -0.05, 0.00},   // r_shoulder
        {0.52, -0.35, 0.08},   // r_elbow
        {0.62, -0.68, 0.16},   // r_wrist
    };
    const double seg_len[4] = {0.13, 0.12, 0.11, 0.11};
    for (int s = 0; s < 2; ++s) {
        const double sx = (s == 0) ? -1.0 : 1.0;
        const Vec3 wrist = p.joints[static_cast<size_t>(s == 0 ? 4 : 7)];
        const Vec3 palm = {wrist[0] + sx * 0.10, wrist[1] - 0.10, wrist[2] + 0.02};
        p.joints.push_back(palm);
        for (int f = 0; f < 5; ++f) {
            // Fan the fingers outward/downward; directions are unit length.
            double dx = sx * (0.25 + 0.14 * (f - 2));
            double dy = -1.0;
            double dz = 0.10 * (f - 2);
            const double n = std::sqrt(dx * dx + dy * dy + dz * dz);
            dx /= n;
            dy /= n;
            dz /= n;
            Vec3 cur = palm;
            for (int seg = 0; seg < 4; ++seg) {
                cur = {cur[0] + dx * seg_len[seg], cur[1] + dy * seg_len[seg], cur[2] + dz * seg_len[seg]};
                p.joints.push_back(cur);
            }
        }
    }
    return p;
}

void normalize_height(Pose3D& p) {
    double lo = p.joints[0][1];
    double hi = lo;
    for (const auto& v : p.joints) {
        lo = std::min(lo, v[1]);
        hi = std::max(hi, v[1]);
    }
    const double scale = 1.0 / (hi - lo);
    for (auto& v : p.joints)
        for (double& c : v) c *= scale;
}

}  // namespace

SkeletonTopology preset_topology(const std::string& name) {
    if (name == "toy8") return make_toy8();
    if (name == "upper50") return make_upper50();
    fail("unknown topology preset: " + name);
}

Pose3D preset_rest_pose(const std::string& name) {
    Pose3D p;
    if (name == "toy8")
        p = rest_toy8();
    else if (name == "upper50")
        p = rest_upper50();
    else
        fail("unknown topology preset: " + name);
    normalize_height(p);
    return p;
}

}  // namespace signidd
