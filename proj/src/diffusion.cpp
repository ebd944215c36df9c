#include "signidd/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#include "signidd/rng.hpp"

namespace signidd {

namespace {

double cosine_f(int t, int T) {
    constexpr double kOffset = 0.008;
    const double x = ((static_cast<double>(t) / T + kOffset) / (1.0 + kOffset)) * (3.14159265358979323846 / 2.0);
    const double c = std::cos(x);
    return c * c;
}

void require_same_dims(const PoseArray& a, const PoseArray& b, const char* op) {
    if (a.S != b.S || a.J != b.J)
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" + std::to_string(a.S) + "x" +
                                    std::to_string(a.J) + " vs " + std::to_string(b.S) + "x" + std::to_string(b.J) +
                                    ")");
}

}  // namespace

NoiseSchedule build_cosine_schedule(int T) {
    if (T < 1) throw std::invalid_argument("schedule: T >= 1 required");
    NoiseSchedule s;
    s.T = T;
    s.beta.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<size_t>(T) + 1, 1.0);
    const double f0 = cosine_f(0, T);
    double prev = 1.0;  // f(0)/f(0)
    for (int t = 1; t <= T; ++t) {
        const double cur = cosine_f(t, T) / f0;
        double beta = 1.0 - cur / prev;
        beta = std::min(beta, 0.999);
        s.beta[static_cast<size_t>(t)] = beta;
        s.alpha[static_cast<size_t>(t)] = 1.0 - beta;
        s.alpha_bar[static_cast<size_t>(t)] = s.alpha_bar[static_cast<size_t>(t) - 1] * (1.0 - beta);
        prev = cur;
    }
    return s;
}

void validate_schedule(const NoiseSchedule& s) {
    if (s.T < 1) throw std::runtime_error("schedule: T >= 1 required");
    if (s.beta.size() != static_cast<size_t>(s.T) + 1 || s.alpha.size() != s.beta.size() ||
        s.alpha_bar.size() != s.beta.size())
        throw std::runtime_error("schedule: array lengths must be T+1");
    if (std::abs(s.alpha_bar[0] - 1.0) > 1e-6) throw std::runtime_error("schedule: alpha_bar[0] must be 1");
    if (s.alpha_bar[static_cast<size_t>(s.T)] >= 0.01) throw std::runtime_error("schedule: alpha_bar[T] must be < 0.01");
    for (int t = 1; t <= s.T; ++t) {
        const double b = s.beta[static_cast<size_t>(t)];
        if (!(b > 0.0) || b > 0.999)
            throw std::runtime_error("schedule: beta out of (0, 0.999] at t=" + std::to_string(t));
        if (!(s.alpha_bar[static_cast<size_t>(t)] < s.alpha_bar[static_cast<size_t>(t) - 1]))
            throw std::runtime_error("schedule: alpha_bar not strictly decreasing at t=" + std::to_string(t));
    }
}

PoseArray forward_noise(const PoseArray& p0, int t, const PoseArray& eps, const NoiseSchedule& sched) {
    if (t < 0 || t > sched.T) throw std::invalid_argument("forward_noise: t out of [0, T]");
    require_same_dims(p0, eps, "forward_noise");
    const double ab = sched.alpha_bar[static_cast<size_t>(t)];
    const double signal = std::sqrt(ab);
    const double noise = std::sqrt(1.0 - ab);
    PoseArray out = p0;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = signal * p0.v[i] + noise * eps.v[i];
    return out;
}

PoseArray ddim_step(const PoseArray& p_t, const PoseArray& p0_hat, int t, int t_prev, const NoiseSchedule& sched,
                    const PoseArray& fresh_eps) {
    if (!(0 <= t_prev && t_prev < t && t <= sched.T))
        throw std::invalid_argument("ddim_step: need 0 <= t_prev < t <= T, got t=" + std::to_string(t) +
                                    " t_prev=" + std::to_string(t_prev));
    require_same_dims(p_t, p0_hat, "ddim_step");
    require_same_dims(p_t, fresh_eps, "ddim_step");
    const double ab_t = sched.alpha_bar[static_cast<size_t>(t)];
    const double ab_prev = sched.alpha_bar[static_cast<size_t>(t_prev)];
    if (ab_prev <= ab_t) throw std::invalid_argument("ddim_step: schedule violation (alpha_bar not decreasing)");
    const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
    const double sqrt_ab_t = std::sqrt(ab_t);
    const double inv_sqrt_one_minus_ab_t = 1.0 / std::sqrt(1.0 - ab_t);
    const double signal = std::sqrt(ab_prev);
    const double eps_coeff = std::sqrt(std::max(1.0 - ab_prev - sigma * sigma, 0.0));
    PoseArray out = p_t;
    for (size_t i = 0; i < out.v.size(); ++i) {
        const double eps_t = (p_t.v[i] - sqrt_ab_t * p0_hat.v[i]) * inv_sqrt_one_minus_ab_t;
        out.v[i] = signal * p0_hat.v[i] + eps_coeff * eps_t + sigma * fresh_eps.v[i];
    }
    return out;
}

std::vector<std::pair<int, int>> inference_timesteps(int T, int I) {
    if (I < 1 || I > T) throw std::invalid_argument("inference_timesteps: need 1 <= I <= T");
    std::vector<int> ts(static_cast<size_t>(I));
    for (int k = 0; k < I; ++k)
        ts[static_cast<size_t>(k)] = static_cast<int>(std::llround(static_cast<double>(T) * (1.0 - static_cast<double>(k) / I)));
    std::vector<std::pair<int, int>> out(static_cast<size_t>(I));
    for (int k = 0; k < I; ++k) {
        const int t = ts[static_cast<size_t>(k)];
        const int t_prev = (k + 1 < I) ? ts[static_cast<size_t>(k) + 1] : 0;
        if (t_prev >= t) throw std::runtime_error("inference_timesteps: spacing collapsed");
        out[static_cast<size_t>(k)] = {t, t_prev};
    }
    return out;
}

Tensor fused_input_tensor(const PoseArray& p, const SkeletonTopology& topo) {
    if (p.J != topo.joint_count()) throw std::invalid_argument("fused input: joint count mismatch");
    std::vector<double> v;
    v.reserve(static_cast<size_t>(p.S) * p.J * 7);
    Pose3D frame;
    frame.joints.resize(static_cast<size_t>(p.J));
    for (int s = 0; s < p.S; ++s) {
        for (int j = 0; j < p.J; ++j) frame.joints[static_cast<size_t>(j)] = {p.at(s, j, 0), p.at(s, j, 1), p.at(s, j, 2)};
        const Fused7D fused = fuse(frame, disentangle(frame, topo));
        for (const auto& row : fused.rows) v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor::from({p.S, p.J * 7}, std::move(v));
}

PoseSequence sample(const GlossSequence& gloss, const AcdModel& model, const NoiseSchedule& sched, int I,
                    uint64_t seed) {
    validate_schedule(sched);
    if (sched.T != model.schedule_T)
        throw std::invalid_argument("sample: schedule T " + std::to_string(sched.T) + " differs from model T " +
                                    std::to_string(model.schedule_T));
    double duration = 0.0;
    for (int tok : gloss.tokens) {
        if (tok < 0 || tok >= model.vocab_size())
            throw std::out_of_range("sample: token index " + std::to_string(tok) + " outside vocabulary");
        duration += model.duration_table[static_cast<size_t>(tok)];
    }
    const int S = std::max(1, static_cast<int>(std::llround(duration)));
    if (duration <= 0.0)
        throw std::runtime_error("sample: duration table is empty for the requested tokens (untrained model?)");
    const int J = model.topology.joint_count();

    Rng rng(seed);
    PoseArray p = PoseArray::zeros(S, J);
    for (double& x : p.v) x = rng.normal();

    const GlossEmbedding g = model.encode_gloss(gloss);
    const auto steps = inference_timesteps(sched.T, I);
    PoseArray p0 = PoseArray::zeros(S, J);
    for (size_t k = 0; k < steps.size(); ++k) {
        const auto [t, t_prev] = steps[k];
        const Tensor fused = fused_input_tensor(p, model.topology);
        const Tensor pred = model.denoise(fused, g, t);
        std::copy(pred.values().begin(), pred.values().end(), p0.v.begin());
        if (k + 1 < steps.size()) {
            PoseArray fresh = PoseArray::zeros(S, J);
            for (double& x : fresh.v) x = rng.normal();
            p = ddim_step(p, p0, t, t_prev, sched, fresh);
        }
    }
    return from_array(p0, model.fps, model.topology_id);
}

}  // namespace signidd
