#include "signidd/eval.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "signidd/disentangle.hpp"
#include "signidd/parallel.hpp"

namespace signidd {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;

void require_comparable(const PoseSequence& a, const PoseSequence& b) {
    if (a.frame_count() != b.frame_count())
        throw std::invalid_argument("metric: sequence length mismatch (" + std::to_string(a.frame_count()) + " vs " +
                                    std::to_string(b.frame_count()) + ")");
    if (a.joint_count() != b.joint_count())
        throw std::invalid_argument("metric: joint count mismatch (" + std::to_string(a.joint_count()) + " vs " +
                                    std::to_string(b.joint_count()) + ")");
}

// Per-frame feature: root-centered flattened coordinates.
void append_features(const PoseSequence& seq, int root, std::vector<Eigen::VectorXd>& out) {
    const int j = seq.joint_count();
    for (const Pose3D& frame : seq.frames) {
        Eigen::VectorXd f(j * 3);
        const Vec3& r = frame.joints[static_cast<size_t>(root)];
        for (int k = 0; k < j; ++k)
            for (int c = 0; c < 3; ++c)
                f[k * 3 + c] = frame.joints[static_cast<size_t>(k)][static_cast<size_t>(c)] - r[static_cast<size_t>(c)];
        out.push_back(std::move(f));
    }
}

Eigen::MatrixXd sym_sqrt(const Eigen::MatrixXd& m) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es((m + m.transpose()) * 0.5);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) ev[i] = ev[i] > 0.0 ? std::sqrt(ev[i]) : 0.0;
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

struct GaussianFit {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;  // sample covariance (N-1)
};

GaussianFit fit_gaussian(const std::vector<Eigen::VectorXd>& features) {
    const int n = static_cast<int>(features.size());
    const int d = static_cast<int>(features.front().size());
    GaussianFit fit;
    fit.mean = Eigen::VectorXd::Zero(d);
    for (const auto& f : features) fit.mean += f;
    fit.mean /= n;
    fit.cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& f : features) {
        const Eigen::VectorXd c = f - fit.mean;
        fit.cov += c * c.transpose();
    }
    fit.cov /= (n - 1);
    return fit;
}

}  // namespace

double mpjpe(const PoseSequence& target, const PoseSequence& pred) {
    require_comparable(target, pred);
    const int s = target.frame_count();
    const int j = target.joint_count();
    double acc = 0.0;
    for (int f = 0; f < s; ++f) {
        for (int k = 0; k < j; ++k) {
            const Vec3& a = target.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(k)];
            const Vec3& b = pred.frames[static_cast<size_t>(f)].joints[static_cast<size_t>(k)];
            const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
            acc += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    }
    return acc / (static_cast<double>(s) * j);
}

double mpjae_degrees(const PoseSequence& target, const PoseSequence& pred, const SkeletonTopology& topo,
                     long* excluded) {
    require_comparable(target, pred);
    if (target.joint_count() != topo.joint_count())
        throw std::invalid_argument("metric: pose joint count does not match topology");
    double acc = 0.0;
    long used = 0, skipped = 0;
    for (int f = 0; f < target.frame_count(); ++f) {
        const Pose4D at = disentangle(target.frames[static_cast<size_t>(f)], topo);
        const Pose4D ap = disentangle(pred.frames[static_cast<size_t>(f)], topo);
        for (const auto& [parent, child] : bone_endpoints(topo)) {
            (void)parent;
            const Bone4& bt = at.rows[static_cast<size_t>(child)];
            const Bone4& bp = ap.rows[static_cast<size_t>(child)];
            if (bt[3] <= 0.0 || bp[3] <= 0.0) {
                ++skipped;
                continue;
            }
            double dot = bt[0] * bp[0] + bt[1] * bp[1] + bt[2] * bp[2];
            dot = std::clamp(dot, -1.0, 1.0);
            acc += std::acos(dot) * kRadToDeg;
            ++used;
        }
    }
    if (excluded) *excluded = skipped;
    return used > 0 ? acc / static_cast<double>(used) : 0.0;
}

double fid(const std::vector<PoseSequence>& real_set, const std::vector<PoseSequence>& gen_set,
           const SkeletonTopology& topo) {
    std::vector<Eigen::VectorXd> fr, fg;
    for (const auto& s : real_set) {
        if (s.joint_count() != topo.joint_count()) throw std::invalid_argument("fid: joint count mismatch");
        append_features(s, topo.root, fr);
    }
    for (const auto& s : gen_set) {
        if (s.joint_count() != topo.joint_count()) throw std::invalid_argument("fid: joint count mismatch");
        append_features(s, topo.root, fg);
    }
    if (fr.size() < 2 || fg.size() < 2) throw std::invalid_argument("fid: each set needs at least 2 frames");

    const GaussianFit a = fit_gaussian(fr);
    const GaussianFit b = fit_gaussian(fg);
    const double mean_term = (a.mean - b.mean).squaredNorm();
    // tr((C1 C2)^(1/2)) == tr((S1 C2 S1)^(1/2)) with S1 = C1^(1/2).
    const Eigen::MatrixXd s1 = sym_sqrt(a.cov);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        (s1 * b.cov * s1 + (s1 * b.cov * s1).transpose()) * 0.5);
    double tr_sqrt = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double ev = es.eigenvalues()[i];
        if (ev > 0.0) tr_sqrt += std::sqrt(ev);
    }
    const double value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    return (value < 0.0 && value > -1e-6) ? 0.0 : value;
}

MetricReport evaluate_sets(const std::vector<PoseSequence>& ref, const std::vector<PoseSequence>& pred,
                           const SkeletonTopology& topo) {
    if (ref.size() != pred.size()) throw std::invalid_argument("evaluate: set sizes differ");
    const int n = static_cast<int>(ref.size());
    MetricReport report;
    report.per_sequence.resize(static_cast<size_t>(n));
    std::vector<long> excluded(static_cast<size_t>(n), 0);
    parallel_for(n, [&](int i) {
        auto& entry = report.per_sequence[static_cast<size_t>(i)];
        entry.index = i;
        try {
            entry.mpjpe = mpjpe(ref[static_cast<size_t>(i)], pred[static_cast<size_t>(i)]);
            entry.mpjae_deg =
                mpjae_degrees(ref[static_cast<size_t>(i)], pred[static_cast<size_t>(i)], topo, &excluded[static_cast<size_t>(i)]);
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
    });

    std::vector<PoseSequence> valid_ref, valid_pred;
    double pe_acc = 0.0, ae_acc = 0.0;
    long frames = 0;
    for (int i = 0; i < n; ++i) {
        const auto& entry = report.per_sequence[static_cast<size_t>(i)];
        if (!entry.error.empty()) continue;
        const long s = ref[static_cast<size_t>(i)].frame_count();
        pe_acc += entry.mpjpe * static_cast<double>(s);
        ae_acc += entry.mpjae_deg * static_cast<double>(s);
        frames += s;
        report.excluded_bones += excluded[static_cast<size_t>(i)];
        valid_ref.push_back(ref[static_cast<size_t>(i)]);
        valid_pred.push_back(pred[static_cast<size_t>(i)]);
    }
    if (frames == 0) throw std::runtime_error("evaluate: no comparable sequence pairs");
    report.mpjpe = pe_acc / static_cast<double>(frames);
    report.mpjae_deg = ae_acc / static_cast<double>(frames);
    report.fid = fid(valid_ref, valid_pred, topo);
    return report;
}

std::string metric_report_json(const MetricReport& report) {
    nlohmann::json doc;
    doc["mpjpe"] = report.mpjpe;
    doc["mpjae_deg"] = report.mpjae_deg;
    doc["fid"] = report.fid;
    doc["excluded_bones"] = report.excluded_bones;
    nlohmann::json per = nlohmann::json::array();
    for (const auto& e : report.per_sequence) {
        nlohmann::json item;
        item["index"] = e.index;
        if (e.error.empty()) {
            item["mpjpe"] = e.mpjpe;
            item["mpjae_deg"] = e.mpjae_deg;
        } else {
            item["error"] = e.error;
        }
        per.push_back(std::move(item));
    }
    doc["per_sequence"] = std::move(per);
    return doc.dump(2);
}

}  // namespace signidd
