#include "signidd/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace signidd {

namespace {

struct Box {
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
};

Box bounding_box(const PoseSequence& seq, const PoseSequence* reference) {
    Box b;
    bool first = true;
    auto grow = [&](const PoseSequence& s) {
        for (const Pose3D& frame : s.frames) {
            for (const Vec3& v : frame.joints) {
                if (first) {
                    b = {v[0], v[0], v[1], v[1]};
                    first = false;
                } else {
                    b.min_x = std::min(b.min_x, v[0]);
                    b.max_x = std::max(b.max_x, v[0]);
                    b.min_y = std::min(b.min_y, v[1]);
                    b.max_y = std::max(b.max_y, v[1]);
                }
            }
        }
    };
    grow(seq);
    if (reference) grow(*reference);
    return b;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

void draw_skeleton(std::ostringstream& out, const Pose3D& pose, const SkeletonTopology& topo, const Box& box,
                   const RenderOptions& opt, double x_offset, const char* bone_color, const char* joint_color) {
    const double span_x = std::max(box.max_x - box.min_x, 1e-9);
    const double span_y = std::max(box.max_y - box.min_y, 1e-9);
    const double scale =
        std::min((opt.panel_width - 2.0 * opt.margin) / span_x, (opt.panel_height - 2.0 * opt.margin) / span_y);
    auto px = [&](const Vec3& v) { return x_offset + opt.margin + (v[0] - box.min_x) * scale; };
    // SVG y grows downward; poses use y-up.
    auto py = [&](const Vec3& v) { return opt.margin + (box.max_y - v[1]) * scale; };
    for (const auto& [parent, child] : bone_endpoints(topo)) {
        const Vec3& a = pose.joints[static_cast<size_t>(parent)];
        const Vec3& b = pose.joints[static_cast<size_t>(child)];
        out << "  <line x1=\"" << fmt(px(a)) << "\" y1=\"" << fmt(py(a)) << "\" x2=\"" << fmt(px(b)) << "\" y2=\""
            << fmt(py(b)) << "\" stroke=\"" << bone_color << "\" stroke-width=\"2\"/>\n";
    }
    for (const Vec3& v : pose.joints) {
        out << "  <circle cx=\"" << fmt(px(v)) << "\" cy=\"" << fmt(py(v)) << "\" r=\"" << fmt(opt.joint_radius)
            << "\" fill=\"" << joint_color << "\"/>\n";
    }
}

}  // namespace

std::string render_frame_svg(const PoseSequence& seq, int frame, const SkeletonTopology& topo,
                             const PoseSequence* reference, const RenderOptions& opt) {
    if (frame < 0 || frame >= seq.frame_count())
        throw std::out_of_range("render: frame index " + std::to_string(frame) + " out of range [0, " +
                                std::to_string(seq.frame_count()) + ")");
    if (seq.joint_count() != topo.joint_count()) throw std::invalid_argument("render: joint count mismatch");
    if (reference) {
        if (reference->joint_count() != topo.joint_count())
            throw std::invalid_argument("render: reference joint count mismatch");
        if (frame >= reference->frame_count())
            throw std::out_of_range("render: frame index out of range for reference");
    }
    const Box box = bounding_box(seq, reference);
    const int panels = reference ? 2 : 1;
    const double total_width = opt.panel_width * panels;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(total_width) << "\" height=\""
        << fmt(opt.panel_height) << "\" viewBox=\"0 0 " << fmt(total_width) << " " << fmt(opt.panel_height)
        << "\">\n";
    out << "  <rect width=\"" << fmt(total_width) << "\" height=\"" << fmt(opt.panel_height)
        << "\" fill=\"white\"/>\n";
    draw_skeleton(out, seq.frames[static_cast<size_t>(frame)], topo, box, opt, 0.0, "#1f6fb2", "#13344f");
    if (reference)
        draw_skeleton(out, reference->frames[static_cast<size_t>(frame)], topo, box, opt, opt.panel_width, "#b24a1f",
                      "#4f2413");
    out << "</svg>\n";
    return out.str();
}

}  // namespace signidd
