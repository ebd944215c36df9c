#include <cmath>

#include "doctest.h"
#include "signidd/eval.hpp"
#include "signidd/rng.hpp"

using namespace signidd;

namespace {

SkeletonTopology chain3() {
    SkeletonTopology t;
    t.joint_names = {"a", "b", "c"};
    t.parents = {0, 0, 1};
    t.root = 0;
    return t;
}

PoseSequence make_seq(std::vector<std::vector<Vec3>> frames, const std::string& id = "custom") {
    PoseSequence s;
    s.topology_id = id;
    for (auto& f : frames) {
        Pose3D p;
        p.joints = std::move(f);
        s.frames.push_back(std::move(p));
    }
    return s;
}

// Point sets engineered to have exact sample mean mu and DIAGONAL sample
// covariance diag(var): pairs mu +- sqrt(var)*e_k contribute var*(2/(2k-1))
// ... constructed instead coordinate-wise below with 2k points.
std::vector<PoseSequence> gaussian_fixture(const Vec3& mean_offset, double var_x, double var_y) {
    // 4 frames, 2 joints (root at origin => features are the raw coords).
    // Coordinates chosen so the sample covariance (N-1 = 3 denominator) of
    // the second joint's x and y is exactly var_x / var_y and means are
    // mean_offset.
    const double sx = std::sqrt(3.0 * var_x / 2.0 / 2.0) * 2.0 / std::sqrt(2.0);  // simplifies to sqrt(3 var/2)... see below
    (void)sx;
    // Use the symmetric 4-point construction: values mu + a, mu - a, mu + a,
    // mu - a have sample variance 4a^2/3; pick a = sqrt(3 var / 4).
    const double ax = std::sqrt(3.0 * var_x / 4.0);
    const double ay = std::sqrt(3.0 * var_y / 4.0);
    std::vector<PoseSequence> set;
    std::vector<std::vector<Vec3>> frames;
    for (int i = 0; i < 4; ++i) {
        const double sx_i = (i % 2 == 0) ? 1.0 : -1.0;
        const double sy_i = (i < 2) ? 1.0 : -1.0;
        frames.push_back({{0, 0, 0},
                          {mean_offset[0] + sx_i * ax, mean_offset[1] + sy_i * ay, mean_offset[2]}});
    }
    set.push_back(make_seq(std::move(frames)));
    return set;
}

}  // namespace

TEST_CASE("mpjpe: zero, single offset joint, global translation") {
    SkeletonTopology topo = chain3();
    (void)topo;
    const PoseSequence a = make_seq({{{0, 0, 0}, {1, 0, 0}}});
    CHECK(mpjpe(a, a) == 0.0);

    // S=1, J=2, one joint off by (3,4,0): (5 + 0)/2.
    const PoseSequence b = make_seq({{{0, 0, 0}, {4, 4, 0}}});
    CHECK(mpjpe(a, b) == doctest::Approx(2.5).epsilon(1e-12));

    const Vec3 c = {1.0, -2.0, 2.0};  // norm 3
    PoseSequence shifted = a;
    for (auto& f : shifted.frames)
        for (auto& v : f.joints)
            for (size_t k = 0; k < 3; ++k) v[k] += c[k];
    CHECK(mpjpe(a, shifted) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(mpjpe(shifted, a) == doctest::Approx(3.0).epsilon(1e-12));  // symmetry

    PoseSequence longer = a;
    longer.frames.push_back(longer.frames[0]);
    CHECK_THROWS_WITH_AS(mpjpe(a, longer), doctest::Contains("length mismatch"), std::invalid_argument);
}

TEST_CASE("mpjae: identical, 90-degree bone, antiparallel bone") {
    const SkeletonTopology topo = chain3();
    const PoseSequence target = make_seq({{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}});
    CHECK(mpjae_degrees(target, target, topo) == doctest::Approx(0.0));

    // First bone rotated 90 degrees (+x -> +y), second unchanged: (90+0)/2.
    const PoseSequence rot = make_seq({{{0, 0, 0}, {0, 1, 0}, {0, 2, 0}}});
    CHECK(mpjae_degrees(target, rot, topo) == doctest::Approx(45.0).epsilon(1e-9));
    CHECK(mpjae_degrees(rot, target, topo) == doctest::Approx(45.0).epsilon(1e-9));  // symmetry

    // Antiparallel first bone contributes 180.
    const PoseSequence flip = make_seq({{{0, 0, 0}, {-1, 0, 0}, {-1, 1, 0}}});
    CHECK(mpjae_degrees(target, flip, topo) == doctest::Approx(90.0).epsilon(1e-9));
}

TEST_CASE("mpjae skips degenerate bones and counts them") {
    const SkeletonTopology topo = chain3();
    const PoseSequence target = make_seq({{{0, 0, 0}, {0, 0, 0}, {1, 0, 0}}});  // first bone degenerate
    const PoseSequence pred = make_seq({{{0, 0, 0}, {0, 0, 0}, {1, 1, 0}}});    // 45 deg on second bone... direction differs
    long excluded = -1;
    const double deg = mpjae_degrees(target, pred, topo, &excluded);
    CHECK(excluded == 1);
    // Only the second bone counts: target dir (1,0,0) from joint1->joint2,
    // pred dir (1,1,0)/sqrt2 -> 45 degrees.
    CHECK(deg == doctest::Approx(45.0).epsilon(1e-9));
}

TEST_CASE("fid: identical sets vanish") {
    SkeletonTopology topo = chain3();
    topo.joint_names = {"a", "b"};
    topo.parents = {0, 0};
    topo.root = 0;
    Rng rng(3);
    std::vector<PoseSequence> set;
    std::vector<std::vector<Vec3>> frames;
    for (int i = 0; i < 12; ++i)
        frames.push_back({{0, 0, 0}, {rng.normal(), rng.normal(), rng.normal()}});
    set.push_back(make_seq(std::move(frames)));
    CHECK(fid(set, set, topo) < 1e-6);
}

TEST_CASE("fid: equal covariance, shifted means -> ||d||^2") {
    SkeletonTopology topo;
    topo.joint_names = {"a", "b"};
    topo.parents = {0, 0};
    topo.root = 0;
    const auto base = gaussian_fixture({0, 0, 0}, 1.0, 2.0);
    const Vec3 d = {0.3, -0.4, 1.0};
    const auto moved = gaussian_fixture(d, 1.0, 2.0);
    const double expected = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
    CHECK(fid(base, moved, topo) == doctest::Approx(expected).epsilon(1e-6));
    CHECK(std::abs(fid(base, moved, topo) - fid(moved, base, topo)) < 1e-6);  // symmetry
}

TEST_CASE("fid: commuting diagonal covariances -> sum (sqrt a - sqrt b)^2") {
    SkeletonTopology topo;
    topo.joint_names = {"a", "b"};
    topo.parents = {0, 0};
    topo.root = 0;
    // var (1, 4) vs (9, 1): closed form (1-3)^2 + (2-1)^2 = 5.
    const auto a = gaussian_fixture({0, 0, 0}, 1.0, 4.0);
    const auto b = gaussian_fixture({0, 0, 0}, 9.0, 1.0);
    CHECK(fid(a, b, topo) == doctest::Approx(5.0).epsilon(1e-6));

    std::vector<PoseSequence> tiny;
    tiny.push_back(make_seq({{{0, 0, 0}, {1, 0, 0}}}));
    CHECK_THROWS_WITH_AS(fid(tiny, a, topo), doctest::Contains("at least 2"), std::invalid_argument);
}

TEST_CASE("evaluate_sets: self-evaluation and mismatched entry reporting") {
    const SkeletonTopology topo = chain3();
    std::vector<PoseSequence> ref, pred;
    Rng rng(4);
    for (int i = 0; i < 3; ++i) {
        std::vector<std::vector<Vec3>> frames;
        for (int f = 0; f < 5; ++f)
            frames.push_back({{0, 0, 0},
                              {rng.normal(), rng.normal(), rng.normal()},
                              {rng.normal(), rng.normal(), rng.normal()}});
        ref.push_back(make_seq(std::move(frames)));
    }
    pred = ref;
    const MetricReport self_report = evaluate_sets(ref, pred, topo);
    CHECK(self_report.mpjpe == doctest::Approx(0.0));
    CHECK(self_report.mpjae_deg == doctest::Approx(0.0));
    CHECK(self_report.fid < 1e-6);
    CHECK(self_report.per_sequence.size() == 3);

    // Length mismatch on one pair: error entry, aggregate over the rest.
    pred[1].frames.pop_back();
    const MetricReport partial = evaluate_sets(ref, pred, topo);
    CHECK(partial.per_sequence[1].error.find("length mismatch") != std::string::npos);
    CHECK(partial.per_sequence[0].error.empty());
    CHECK(partial.mpjpe == doctest::Approx(0.0));

    const std::string json_text = metric_report_json(partial);
    CHECK(json_text.find("\"mpjpe\"") != std::string::npos);
    CHECK(json_text.find("\"per_sequence\"") != std::string::npos);
}
