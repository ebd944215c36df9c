#pragma once

#include <string>

#include "signidd/data.hpp"
#include "signidd/skeleton.hpp"

namespace signidd {

struct RenderOptions {
    double panel_width = 420.0;
    double panel_height = 420.0;
    double margin = 30.0;
    double joint_radius = 3.0;
};

// Stick-figure SVG of one frame (x/y orthographic projection): bones as line
// segments, joints as circles. When reference is given the two skeletons are
// drawn in side-by-side panels sharing one scale. Byte-deterministic.
std::string render_frame_svg(const PoseSequence& seq, int frame, const SkeletonTopology& topo,
                             const PoseSequence* reference = nullptr, const RenderOptions& opt = {});

}  // namespace signidd
