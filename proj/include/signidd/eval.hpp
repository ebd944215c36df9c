#pragma once

#include <string>
#include <vector>

#include "signidd/data.hpp"
#include "signidd/skeleton.hpp"

namespace signidd {

// Mean Euclidean joint distance over frames and joints. Requires equal S, J.
double mpjpe(const PoseSequence& target, const PoseSequence& pred);

// Mean bone-direction angular error in degrees, arccos of the clamped dot
// product. Bones degenerate in either pose are skipped; *excluded counts
// them when provided.
double mpjae_degrees(const PoseSequence& target, const PoseSequence& pred, const SkeletonTopology& topo,
                     long* excluded = nullptr);

// Frechet distance between Gaussian fits of per-frame features
// (root-centered flattened coordinates). Matrix square root via symmetric
// eigendecomposition with negative eigenvalues clamped at 0; tiny negative
// results report as 0.
double fid(const std::vector<PoseSequence>& real_set, const std::vector<PoseSequence>& gen_set,
           const SkeletonTopology& topo);

struct MetricReport {
    double mpjpe = 0.0;
    double mpjae_deg = 0.0;
    double fid = 0.0;
    long excluded_bones = 0;

    struct PerSequence {
        int index = 0;
        double mpjpe = 0.0;
        double mpjae_deg = 0.0;
        std::string error;  // non-empty when the pair could not be compared
    };
    std::vector<PerSequence> per_sequence;
};

// Pairs sequences by index; incomparable pairs get an error entry and the
// aggregates are taken over the valid pairs (frame-weighted for MPJPE/MPJAE,
// pooled frames for FID).
MetricReport evaluate_sets(const std::vector<PoseSequence>& ref, const std::vector<PoseSequence>& pred,
                           const SkeletonTopology& topo);

std::string metric_report_json(const MetricReport& report);

}  // namespace signidd
