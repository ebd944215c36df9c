#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "signidd/acd.hpp"
#include "signidd/data.hpp"

namespace signidd {

// Arrays are length T+1, indexed by timestep; index 0 is the "no noise"
// anchor (beta[0] = 0, alpha_bar[0] = 1); the diffusion steps are t in [1,T].
struct NoiseSchedule {
    int T = 0;
    std::vector<double> beta;
    std::vector<double> alpha;      // a_t = 1 - beta_t
    std::vector<double> alpha_bar;  // prod_{u<=t} a_u, strictly decreasing
};

// Cosine schedule: alpha_bar_t = f(t)/f(0), f(t) = cos^2(((t/T + s)/(1 + s))
// * pi/2) with s = 0.008, betas clipped at 0.999.
NoiseSchedule build_cosine_schedule(int T);

// Throws if any NoiseSchedule invariant fails.
void validate_schedule(const NoiseSchedule& sched);

// sqrt(alpha_bar_t) * p0 + sqrt(1 - alpha_bar_t) * eps
PoseArray forward_noise(const PoseArray& p0, int t, const PoseArray& eps, const NoiseSchedule& sched);

// Reverse update: eps_t = (p_t - sqrt(ab_t) p0_hat)/sqrt(1 - ab_t),
// sigma_t = sqrt((1-ab_prev)/(1-ab_t)) * sqrt(1 - ab_t/ab_prev), result =
// sqrt(ab_prev) p0_hat + sqrt(1 - ab_prev - sigma_t^2) eps_t + sigma_t eps.
PoseArray ddim_step(const PoseArray& p_t, const PoseArray& p0_hat, int t, int t_prev, const NoiseSchedule& sched,
                    const PoseArray& fresh_eps);

// I evenly spaced refinement passes: t_k = round(T * (1 - k/I)) paired with
// the next value, final t_prev = 0. Strictly decreasing, first t = T.
std::vector<std::pair<int, int>> inference_timesteps(int T, int I);

// Per-frame disentangle + fuse of a noisy pose array into the S x (J*7)
// denoiser input (no gradient tracking).
Tensor fused_input_tensor(const PoseArray& p, const SkeletonTopology& topo);

// Full reverse chain from unit-Gaussian noise, conditioned on the gloss.
// S comes from the model's duration table. Deterministic given the seed;
// returns the final denoised pose hypothesis.
PoseSequence sample(const GlossSequence& gloss, const AcdModel& model, const NoiseSchedule& sched, int I,
                    uint64_t seed);

}  // namespace signidd
