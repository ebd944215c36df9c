#include "signidd/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "signidd/parallel.hpp"
#include "signidd/rng.hpp"

namespace signidd {

namespace {

Tensor target_tensor(const PoseArray& target) {
    return Tensor::from({target.S, target.J * 3}, target.v);
}

// Bone directions of a concrete pose array via the plain disentangle path.
std::vector<double> plain_bone_dirs(const PoseArray& p, const SkeletonTopology& topo) {
    const auto bones = bone_endpoints(topo);
    std::vector<double> dirs(static_cast<size_t>(p.S) * bones.size() * 3, 0.0);
    Pose3D frame;
    frame.joints.resize(static_cast<size_t>(p.J));
    for (int s = 0; s < p.S; ++s) {
        for (int j = 0; j < p.J; ++j) frame.joints[static_cast<size_t>(j)] = {p.at(s, j, 0), p.at(s, j, 1), p.at(s, j, 2)};
        const Pose4D attrs = disentangle(frame, topo);
        for (size_t b = 0; b < bones.size(); ++b) {
            const Bone4& row = attrs.rows[static_cast<size_t>(bones[b].second)];
            dirs[(static_cast<size_t>(s) * bones.size() + b) * 3 + 0] = row[0];
            dirs[(static_cast<size_t>(s) * bones.size() + b) * 3 + 1] = row[1];
            dirs[(static_cast<size_t>(s) * bones.size() + b) * 3 + 2] = row[2];
        }
    }
    return dirs;
}

void require_pred_shape(const PoseArray& target, const Tensor& pred, const char* op) {
    if (pred.rows() != target.S || pred.cols() != target.J * 3)
        throw std::invalid_argument(std::string(op) + ": prediction shape mismatch");
}

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long step = 0;

    explicit AdamState(std::span<const Tensor> params) {
        m.reserve(params.size());
        v.reserve(params.size());
        for (const Tensor& p : params) {
            m.emplace_back(static_cast<size_t>(p.size()), 0.0);
            v.emplace_back(static_cast<size_t>(p.size()), 0.0);
        }
    }

    void update(std::span<const Tensor> params, double lr) {
        constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
        ++step;
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        for (size_t i = 0; i < params.size(); ++i) {
            Tensor p = params[i];
            const auto g = p.grad();
            if (g.empty()) continue;
            double* values = p.data();
            for (size_t k = 0; k < g.size(); ++k) {
                m[i][k] = kBeta1 * m[i][k] + (1.0 - kBeta1) * g[k];
                v[i][k] = kBeta2 * v[i][k] + (1.0 - kBeta2) * g[k] * g[k];
                const double mhat = m[i][k] / bc1;
                const double vhat = v[i][k] / bc2;
                values[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
            }
        }
    }
};

void clip_gradients(std::span<const Tensor> params, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (const Tensor& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double factor = max_norm / norm;
    for (const Tensor& p : params) {
        auto& grad = p.node()->grad;
        for (double& g : grad) g *= factor;
    }
}

}  // namespace

Tensor loss_joint_graph(const PoseArray& target, const Tensor& pred) {
    require_pred_shape(target, pred, "loss_joint");
    return mean_all(abs_elem(sub(pred, target_tensor(target))));
}

Tensor loss_bone_graph(const PoseArray& target, const Tensor& pred, const SkeletonTopology& topo) {
    require_pred_shape(target, pred, "loss_bone");
    const int b = topo.bone_count();
    const Tensor target_dirs = Tensor::from({target.S, b * 3}, plain_bone_dirs(target, topo));
    const Tensor diff = sub(bone_directions(pred, topo), target_dirs);
    return mean_all(mul(diff, diff));
}

double loss_joint(const PoseArray& target, const PoseArray& pred) {
    if (target.S != pred.S || target.J != pred.J) throw std::invalid_argument("loss_joint: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < target.v.size(); ++i) acc += std::abs(target.v[i] - pred.v[i]);
    return acc / static_cast<double>(target.v.size());
}

double loss_bone(const PoseArray& target, const PoseArray& pred, const SkeletonTopology& topo) {
    if (target.S != pred.S || target.J != pred.J) throw std::invalid_argument("loss_bone: shape mismatch");
    const auto dt = plain_bone_dirs(target, topo);
    const auto dp = plain_bone_dirs(pred, topo);
    double acc = 0.0;
    for (size_t i = 0; i < dt.size(); ++i) {
        const double d = dt[i] - dp[i];
        acc += d * d;
    }
    return acc / static_cast<double>(dt.size());
}

double loss_total(const PoseArray& target, const PoseArray& pred, const SkeletonTopology& topo,
                  const TrainConfig& cfg) {
    return loss_joint(target, pred) + cfg.lambda_bone * loss_bone(target, pred, topo);
}

std::vector<double> duration_table_from(const Corpus& corpus, int vocab_size) {
    std::vector<double> sums(static_cast<size_t>(vocab_size), 0.0);
    std::vector<long> counts(static_cast<size_t>(vocab_size), 0);
    double global_sum = 0.0;
    long global_count = 0;
    for (const CorpusSample& s : corpus.samples) {
        if (s.gloss.tokens.empty()) continue;
        const double share = static_cast<double>(s.pose.frame_count()) / static_cast<double>(s.gloss.tokens.size());
        for (int tok : s.gloss.tokens) {
            sums[static_cast<size_t>(tok)] += share;
            ++counts[static_cast<size_t>(tok)];
            global_sum += share;
            ++global_count;
        }
    }
    const double fallback = global_count > 0 ? global_sum / static_cast<double>(global_count) : 0.0;
    std::vector<double> table(static_cast<size_t>(vocab_size), fallback);
    for (int v = 0; v < vocab_size; ++v)
        if (counts[static_cast<size_t>(v)] > 0) table[static_cast<size_t>(v)] = sums[static_cast<size_t>(v)] / counts[static_cast<size_t>(v)];
    return table;
}

std::vector<EpochLoss> train(const Corpus& corpus, AcdModel& model, const NoiseSchedule& sched,
                             const TrainConfig& cfg) {
    if (corpus.samples.empty()) throw std::invalid_argument("train: empty corpus");
    if (static_cast<int>(corpus.vocabulary.size()) != model.vocab_size())
        throw std::invalid_argument("train: corpus vocabulary size does not match model");
    if (sched.T != cfg.schedule_T || sched.T != model.schedule_T)
        throw std::invalid_argument("train: schedule T mismatch between config, schedule, and model");
    validate_schedule(sched);
    const int j = model.topology.joint_count();
    for (const CorpusSample& s : corpus.samples) {
        if (s.pose.joint_count() != j) throw std::invalid_argument("train: sample joint count does not match topology");
        if (s.gloss.tokens.empty()) throw std::invalid_argument("train: sample with empty gloss");
    }
    if (cfg.batch_size < 1 || cfg.epochs < 1) throw std::invalid_argument("train: bad batch size / epoch count");

    model.duration_table = duration_table_from(corpus, model.vocab_size());
    model.fps = corpus.samples.front().pose.fps;

    std::vector<PoseArray> targets;
    targets.reserve(corpus.samples.size());
    for (const CorpusSample& s : corpus.samples) targets.push_back(to_array(s.pose));

    const auto params = model.parameters();
    AdamState adam(params);
    Rng rng(cfg.seed);
    const int n = static_cast<int>(corpus.samples.size());
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    std::vector<EpochLoss> history;
    history.reserve(static_cast<size_t>(cfg.epochs));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the run's rng stream.
        for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(rng.uniform_int(0, i))]);

        // When the corpus is smaller than a batch, cycle it so every update
        // still averages batch_size independent (t, eps) draws.
        std::vector<int> elements = order;
        if (n < cfg.batch_size) {
            elements.resize(static_cast<size_t>(cfg.batch_size));
            for (int i = n; i < cfg.batch_size; ++i) elements[static_cast<size_t>(i)] = order[static_cast<size_t>(i % n)];
        }
        const int total = static_cast<int>(elements.size());

        EpochLoss acc;
        int batch_index = 0;
        for (int start = 0; start < total; start += cfg.batch_size, ++batch_index) {
            const int count = std::min(cfg.batch_size, total - start);
            // The batch's randomness is drawn up front in element order, so
            // the stream does not depend on the evaluation schedule.
            std::vector<int> sample_idx(static_cast<size_t>(count));
            std::vector<int> ts(static_cast<size_t>(count));
            std::vector<PoseArray> noisy(static_cast<size_t>(count));
            for (int e = 0; e < count; ++e) {
                const int idx = elements[static_cast<size_t>(start + e)];
                sample_idx[static_cast<size_t>(e)] = idx;
                const PoseArray& target = targets[static_cast<size_t>(idx)];
                ts[static_cast<size_t>(e)] = rng.uniform_int(1, sched.T);
                PoseArray eps = PoseArray::zeros(target.S, target.J);
                for (double& x : eps.v) x = rng.normal();
                noisy[static_cast<size_t>(e)] = forward_noise(target, ts[static_cast<size_t>(e)], eps, sched);
            }

            // Each element's forward/backward runs against its own gradient
            // sink; sinks merge in element order, so the result is identical
            // for every worker count (including 1).
            std::vector<GradMap> sinks(static_cast<size_t>(count));
            std::vector<double> joint_vals(static_cast<size_t>(count)), bone_vals(static_cast<size_t>(count)),
                obj_vals(static_cast<size_t>(count));
            const double inv_count = 1.0 / count;
            parallel_for(count, [&](int e) {
                const int idx = sample_idx[static_cast<size_t>(e)];
                const PoseArray& target = targets[static_cast<size_t>(idx)];
                const Tensor fused = fused_input_tensor(noisy[static_cast<size_t>(e)], model.topology);
                const GlossEmbedding g = model.encode_gloss(corpus.samples[static_cast<size_t>(idx)].gloss);
                const Tensor pred = model.denoise(fused, g, ts[static_cast<size_t>(e)]);

                const Tensor lj = loss_joint_graph(target, pred);
                double bone_value = 0.0;
                Tensor obj = lj;
                if (cfg.lambda_bone > 0.0) {
                    const Tensor lb = loss_bone_graph(target, pred, model.topology);
                    bone_value = lb.item();
                    obj = add(lj, scale(lb, cfg.lambda_bone));
                } else {
                    // Still reported (unweighted) in the loss history.
                    PoseArray pred_arr = PoseArray::zeros(target.S, target.J);
                    std::copy(pred.values().begin(), pred.values().end(), pred_arr.v.begin());
                    bone_value = loss_bone(target, pred_arr, model.topology);
                }
                joint_vals[static_cast<size_t>(e)] = lj.item();
                bone_vals[static_cast<size_t>(e)] = bone_value;
                obj_vals[static_cast<size_t>(e)] = obj.item();
                backward_into(scale(obj, inv_count), sinks[static_cast<size_t>(e)]);
            });

            for (int e = 0; e < count; ++e) {
                if (!std::isfinite(obj_vals[static_cast<size_t>(e)]))
                    throw std::runtime_error("train: diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                                             " batch " + std::to_string(batch_index));
                acc.joint += joint_vals[static_cast<size_t>(e)];
                acc.bone += bone_vals[static_cast<size_t>(e)];
                acc.total += joint_vals[static_cast<size_t>(e)] + cfg.lambda_bone * bone_vals[static_cast<size_t>(e)];
            }

            zero_grad(params);
            for (int e = 0; e < count; ++e) {
                for (const Tensor& p : params) {
                    const auto it = sinks[static_cast<size_t>(e)].find(p.node().get());
                    if (it == sinks[static_cast<size_t>(e)].end()) continue;
                    auto& dst = p.node()->grad;
                    for (size_t i = 0; i < dst.size(); ++i) dst[i] += it->second[i];
                }
            }
            clip_gradients(params, cfg.clip_norm);
            adam.update(params, cfg.learning_rate);
        }
        acc.total /= total;
        acc.joint /= total;
        acc.bone /= total;
        history.push_back(acc);
    }
    return history;
}

void write_loss_csv(const std::vector<EpochLoss>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("loss csv: cannot write " + path);
    out << "epoch,loss_total,loss_joint,loss_bone\n";
    char line[160];
    for (size_t i = 0; i < history.size(); ++i) {
        std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g\n", i, history[i].total, history[i].joint,
                      history[i].bone);
        out << line;
    }
}

}  // namespace signidd
