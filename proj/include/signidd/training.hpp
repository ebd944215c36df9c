#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "signidd/acd.hpp"
#include "signidd/data.hpp"
#include "signidd/diffusion.hpp"

namespace signidd {

struct TrainConfig {
    double lambda_bone = 0.1;     // bone-constraint weight (best ablation row)
    double learning_rate = 1e-3;
    int batch_size = 4;
    int epochs = 200;
    int schedule_T = 1000;
    uint64_t seed = 0;
    double clip_norm = 1.0;       // global-norm gradient clip; <= 0 disables
};

struct EpochLoss {
    double total = 0.0;
    double joint = 0.0;
    double bone = 0.0;
};

// Differentiable losses used by the training graph (pred is S x (J*3)).
Tensor loss_joint_graph(const PoseArray& target, const Tensor& pred);
Tensor loss_bone_graph(const PoseArray& target, const Tensor& pred, const SkeletonTopology& topo);

// Plain scalar losses over concrete arrays. loss_bone is implemented via the
// non-graph disentangle path, independent of the autograd op it validates.
double loss_joint(const PoseArray& target, const PoseArray& pred);
double loss_bone(const PoseArray& target, const PoseArray& pred, const SkeletonTopology& topo);
double loss_total(const PoseArray& target, const PoseArray& pred, const SkeletonTopology& topo,
                  const TrainConfig& cfg);

// Mean frames credited per token (each sample credits S/K to each of its K
// token occurrences); unseen tokens get the corpus-wide mean.
std::vector<double> duration_table_from(const Corpus& corpus, int vocab_size);

// Single-step denoising training (Adam, beta1 0.9, beta2 0.999, eps 1e-8):
// per element, sample t uniform in [1,T], noise the target, denoise under
// the gloss condition, minimize loss_joint + lambda * loss_bone. Fills the
// model's duration table. Deterministic given cfg.seed. Throws on a
// non-finite loss, naming the epoch and batch.
std::vector<EpochLoss> train(const Corpus& corpus, AcdModel& model, const NoiseSchedule& sched,
                             const TrainConfig& cfg);

// CSV: epoch,loss_total,loss_joint,loss_bone
void write_loss_csv(const std::vector<EpochLoss>& history, const std::string& path);

}  // namespace signidd
