// Acceptance suite: runs every gate end to end and prints one pass/fail line
// per criterion. Exit code 0 only if all pass.
//
// SIGN_IDD_ACCEPT_ONLY="1,4,9" limits the run to a comma-separated subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "signidd/data.hpp"
#include "signidd/diffusion.hpp"
#include "signidd/eval.hpp"
#include "signidd/rng.hpp"
#include "signidd/training.hpp"

using namespace signidd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Check {
    int id;
    std::string name;
    std::function<Outcome()> run;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

Pose3D random_pose(const SkeletonTopology& topo, Rng& rng) {
    Pose3D p;
    p.joints.resize(static_cast<size_t>(topo.joint_count()));
    for (auto& v : p.joints)
        for (double& c : v) c = 2.0 * rng.uniform() - 1.0;
    return p;
}

// ---- criteria 1-2: disentanglement ---------------------------------------

Outcome criterion_roundtrip() {
    Rng rng(101);
    double max_dev = 0.0;
    for (const char* name : {"toy8", "upper50"}) {
        const SkeletonTopology topo = preset_topology(name);
        for (int i = 0; i < 1000; ++i) {
            const Pose3D p = random_pose(topo, rng);
            const Pose3D back = reassemble(disentangle(p, topo), p.joints[static_cast<size_t>(topo.root)], topo);
            for (size_t j = 0; j < p.joints.size(); ++j)
                for (size_t c = 0; c < 3; ++c) max_dev = std::max(max_dev, std::abs(back.joints[j][c] - p.joints[j][c]));
        }
    }
    return {max_dev < 1e-9, "max |reassemble(disentangle(p)) - p| = " + fmt(max_dev) + " over 2x1000 poses"};
}

Outcome criterion_direction_invariants() {
    Rng rng(202);
    double worst_norm = 0.0, worst_shift = 0.0, worst_scale = 0.0;
    for (const char* name : {"toy8", "upper50"}) {
        const SkeletonTopology topo = preset_topology(name);
        for (int i = 0; i < 200; ++i) {
            const Pose3D p = random_pose(topo, rng);
            const Pose4D a = disentangle(p, topo);
            for (const auto& row : a.rows) {
                if (row[3] <= 0.0) continue;
                const double n = std::sqrt(row[0] * row[0] + row[1] * row[1] + row[2] * row[2]);
                worst_norm = std::max(worst_norm, std::abs(n - 1.0));
            }
            Pose3D shifted = p;
            const Vec3 c = {3.25, -1.5, 0.75};
            for (auto& v : shifted.joints)
                for (size_t k = 0; k < 3; ++k) v[k] += c[k];
            const Pose4D b = disentangle(shifted, topo);
            for (size_t j = 0; j < a.rows.size(); ++j)
                for (size_t k = 0; k < 4; ++k) worst_shift = std::max(worst_shift, std::abs(a.rows[j][k] - b.rows[j][k]));

            const double s = 2.5;
            Pose3D scaled = p;
            for (auto& v : scaled.joints)
                for (double& k : v) k *= s;
            const Pose4D sc = disentangle(scaled, topo);
            for (size_t j = 0; j < a.rows.size(); ++j) {
                for (size_t k = 0; k < 3; ++k) worst_scale = std::max(worst_scale, std::abs(sc.rows[j][k] - a.rows[j][k]));
                worst_scale = std::max(worst_scale, std::abs(sc.rows[j][3] - s * a.rows[j][3]));
            }
        }
    }
    const bool pass = worst_norm < 1e-6 && worst_shift < 1e-12 && worst_scale < 1e-9;
    return {pass, "unit-norm dev " + fmt(worst_norm) + ", translation dev " + fmt(worst_shift) + ", scale dev " +
                      fmt(worst_scale)};
}

// ---- criterion 3: schedule ------------------------------------------------

Outcome criterion_schedule() {
    for (int T : {10, 100, 1000}) {
        const NoiseSchedule s = build_cosine_schedule(T);
        if (std::abs(s.alpha_bar[0] - 1.0) > 1e-6) return {false, "alpha_bar[0] != 1 at T=" + std::to_string(T)};
        if (!(s.alpha_bar[static_cast<size_t>(T)] < 0.01))
            return {false, "alpha_bar[T] >= 0.01 at T=" + std::to_string(T)};
        for (int t = 1; t <= T; ++t)
            if (!(s.alpha_bar[static_cast<size_t>(t)] < s.alpha_bar[static_cast<size_t>(t) - 1]))
                return {false, "alpha_bar not strictly decreasing at T=" + std::to_string(T)};
    }
    // Independent closed form at the midpoint of T=1000.
    const double kS = 0.008;
    const auto f = [&](double t) {
        const double c = std::cos(((t / 1000.0 + kS) / (1.0 + kS)) * 3.14159265358979323846 / 2.0);
        return c * c;
    };
    const double closed = f(500.0) / f(0.0);
    const NoiseSchedule s = build_cosine_schedule(1000);
    const double got = s.alpha_bar[500];
    const bool mid_ok = std::abs(got - closed) < 1e-6 && std::abs(closed - 0.4938) < 5e-4;
    return {mid_ok, "alpha_bar[500] = " + fmt(got) + " vs closed form " + fmt(closed)};
}

// ---- criterion 4: sampler algebra ------------------------------------------

Outcome criterion_sampler_algebra() {
    const NoiseSchedule s = build_cosine_schedule(1000);
    Rng rng(303);
    // Epsilon reconstruction identity on random tensors.
    double worst_recon = 0.0;
    for (int i = 0; i < 50; ++i) {
        const int t = rng.uniform_int(1, 1000);
        const double ab = s.alpha_bar[static_cast<size_t>(t)];
        for (int k = 0; k < 100; ++k) {
            const double p0 = 3.0 * rng.normal();
            const double eps = rng.normal();
            const double p_t = std::sqrt(ab) * p0 + std::sqrt(1.0 - ab) * eps;
            const double eps_t = (p_t - std::sqrt(ab) * p0) / std::sqrt(1.0 - ab);
            const double rebuilt = std::sqrt(ab) * p0 + std::sqrt(1.0 - ab) * eps_t;
            worst_recon = std::max(worst_recon, std::abs(rebuilt - p_t));
        }
    }
    if (!(worst_recon < 1e-9)) return {false, "epsilon reconstruction deviation " + fmt(worst_recon)};

    // Sigma equals the DDPM posterior std for 100 random adjacent pairs.
    double worst_sigma = 0.0;
    for (int i = 0; i < 100; ++i) {
        const int t = rng.uniform_int(2, 1000);
        const double ab_t = s.alpha_bar[static_cast<size_t>(t)];
        const double ab_prev = s.alpha_bar[static_cast<size_t>(t) - 1];
        const double sigma = std::sqrt((1.0 - ab_prev) / (1.0 - ab_t)) * std::sqrt(1.0 - ab_t / ab_prev);
        const double posterior = std::sqrt(s.beta[static_cast<size_t>(t)] * (1.0 - ab_prev) / (1.0 - ab_t));
        worst_sigma = std::max(worst_sigma, std::abs(sigma - posterior));
    }
    if (!(worst_sigma < 1e-9)) return {false, "sigma vs DDPM posterior deviation " + fmt(worst_sigma)};

    // Noise-free ddim_step collapse, exact.
    PoseArray p0_hat = PoseArray::zeros(3, 4);
    for (double& x : p0_hat.v) x = rng.normal();
    const int t = 700, t_prev = 350;
    PoseArray p_t = p0_hat;
    for (double& x : p_t.v) x *= std::sqrt(s.alpha_bar[static_cast<size_t>(t)]);
    const PoseArray out = ddim_step(p_t, p0_hat, t, t_prev, s, PoseArray::zeros(3, 4));
    const double signal = std::sqrt(s.alpha_bar[static_cast<size_t>(t_prev)]);
    for (size_t i = 0; i < out.v.size(); ++i)
        if (out.v[i] != signal * p0_hat.v[i]) return {false, "ddim_step noise-free collapse not exact"};

    return {true, "recon dev " + fmt(worst_recon) + ", sigma dev " + fmt(worst_sigma) + ", collapse exact"};
}

// ---- criterion 5: gradient correctness -------------------------------------

Outcome criterion_gradients() {
    const SkeletonTopology topo = preset_topology("toy8");
    std::vector<std::string> vocab;
    for (int i = 0; i < 5; ++i) vocab.push_back("g" + std::to_string(i));
    AcdConfig cfg;
    cfg.d_model = 16;
    cfg.heads = 4;
    cfg.gloss_layers = 1;

    double worst = 0.0;
    long coords_checked = 0;
    for (uint64_t seed = 0; seed < 5; ++seed) {
        AcdModel model = AcdModel::init(cfg, topo, "toy8", vocab, 100, seed);
        Rng rng(400 + seed);
        PoseArray target = PoseArray::zeros(2, 8);
        for (double& x : target.v) x = rng.normal();
        PoseArray noisy = PoseArray::zeros(2, 8);
        for (double& x : noisy.v) x = rng.normal();
        const Tensor fused = fused_input_tensor(noisy, topo);
        const GlossSequence gloss{{static_cast<int>(seed % 5), static_cast<int>((seed + 2) % 5)}};
        const auto objective = [&] {
            const Tensor pred = model.denoise(fused, model.encode_gloss(gloss), 17);
            return add(loss_joint_graph(target, pred), scale(loss_bone_graph(target, pred, topo), 0.1));
        };
        GradCheckOptions opts;
        opts.max_coords_per_param = 2;  // 2 per parameter tensor, 74 tensors -> 148 coords/seed
        opts.sample_seed = seed;
        worst = std::max(worst, check_gradients(objective, model.parameters(), opts));
        coords_checked += 2 * static_cast<long>(model.parameters().size());
    }
    return {worst < 1e-4 && coords_checked >= 500,
            "max relative error " + fmt(worst) + " over " + std::to_string(coords_checked) + " coordinates, 5 seeds"};
}

// ---- criteria 6-8: learning runs -------------------------------------------

struct HeldOutMetrics {
    double mpjpe = 0.0;
    double mpjae = 0.0;
};

HeldOutMetrics held_out_metrics(const Corpus& corpus, size_t first_held_out, const AcdModel& model,
                                const NoiseSchedule& sched, uint64_t sample_seed_base) {
    std::vector<PoseSequence> ref, pred;
    for (size_t i = first_held_out; i < corpus.samples.size(); ++i) {
        ref.push_back(corpus.samples[i].pose);
        pred.push_back(sample(corpus.samples[i].gloss, model, sched, 5, sample_seed_base + i));
    }
    const MetricReport report = evaluate_sets(ref, pred, model.topology);
    for (const auto& e : report.per_sequence)
        if (!e.error.empty()) throw std::runtime_error("held-out sample incomparable: " + e.error);
    return {report.mpjpe, report.mpjae_deg};
}

Outcome criterion_overfit() {
    const SkeletonTopology topo = preset_topology("toy8");
    SynthOptions opt;
    opt.vocab_size = 3;
    opt.samples = 1;
    opt.frames_per_gloss = 10;
    opt.min_tokens = 3;
    opt.max_tokens = 3;
    opt.seed = 7;
    const Corpus corpus = generate_synthetic_corpus(opt, topo, "toy8");

    TrainConfig cfg;
    cfg.lambda_bone = 0.1;    // paper's best row
    cfg.learning_rate = 1e-3; // paper's value
    cfg.schedule_T = 1000;    // paper's value
    cfg.epochs = 2000;
    cfg.batch_size = 24;      // 24 independent (t, eps) draws per update
    cfg.seed = 1;
    AcdConfig acd;  // desk defaults: d_model 64, heads 4, gloss layers 2
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);
    AcdModel model = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, cfg.seed);
    train(corpus, model, sched, cfg);

    // Single-step denoising MPJPE, mean over 64 seeded (t, eps) draws.
    const PoseArray target = to_array(corpus.samples[0].pose);
    const GlossEmbedding g = model.encode_gloss(corpus.samples[0].gloss);
    Rng rng(555);
    double single_step = 0.0;
    const int draws = 64;
    for (int k = 0; k < draws; ++k) {
        const int t = rng.uniform_int(1, cfg.schedule_T);
        PoseArray eps = PoseArray::zeros(target.S, target.J);
        for (double& x : eps.v) x = rng.normal();
        const PoseArray noisy = forward_noise(target, t, eps, sched);
        const Tensor pred = model.denoise(fused_input_tensor(noisy, topo), g, t);
        PoseArray pred_arr = PoseArray::zeros(target.S, target.J);
        std::copy(pred.values().begin(), pred.values().end(), pred_arr.v.begin());
        single_step += mpjpe(corpus.samples[0].pose, from_array(pred_arr, 25.0, "toy8"));
    }
    single_step /= draws;

    const PoseSequence sampled = sample(corpus.samples[0].gloss, model, sched, 5, 9);
    const double five_step = mpjpe(corpus.samples[0].pose, sampled);
    const bool pass = single_step < 0.02 && five_step < 0.05;
    return {pass, "single-step MPJPE " + fmt(single_step) + " (< 0.02), 5-step MPJPE " + fmt(five_step) + " (< 0.05)"};
}

struct GeneralizationRun {
    double mpjpe = 0.0, mpjae = 0.0;
    double baseline_mpjpe = 0.0, baseline_mpjae = 0.0;
};

GeneralizationRun run_generalization(uint64_t seed, double lambda, bool with_baseline) {
    const SkeletonTopology topo = preset_topology("toy8");
    SynthOptions opt;
    opt.vocab_size = 20;
    opt.samples = 200;
    opt.frames_per_gloss = 10;
    opt.min_tokens = 2;
    opt.max_tokens = 4;
    opt.seed = 42;  // one corpus shared by all runs
    const Corpus corpus = generate_synthetic_corpus(opt, topo, "toy8");
    const size_t split = 180;  // 90/10

    Corpus train_set;
    train_set.vocabulary = corpus.vocabulary;
    train_set.samples.assign(corpus.samples.begin(), corpus.samples.begin() + split);

    TrainConfig cfg;
    cfg.lambda_bone = lambda;
    cfg.learning_rate = 1e-3;
    cfg.schedule_T = 1000;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.seed = seed;
    AcdConfig acd;  // desk defaults: d_model 64, heads 4, gloss layers 2
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);

    AcdModel model = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, cfg.seed);
    GeneralizationRun run;
    if (with_baseline) {
        AcdModel untrained = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, cfg.seed);
        untrained.duration_table = duration_table_from(train_set, untrained.vocab_size());
        const HeldOutMetrics base = held_out_metrics(corpus, split, untrained, sched, 9000 + seed);
        run.baseline_mpjpe = base.mpjpe;
        run.baseline_mpjae = base.mpjae;
    }
    train(train_set, model, sched, cfg);
    const HeldOutMetrics trained = held_out_metrics(corpus, split, model, sched, 9000 + seed);
    run.mpjpe = trained.mpjpe;
    run.mpjae = trained.mpjae;
    return run;
}

// Shared across criteria 7 and 8.
std::vector<GeneralizationRun> g_lambda_runs;   // lambda = 0.1, seeds 0..2
std::vector<GeneralizationRun> g_nolambda_runs; // lambda = 0,   seeds 0..2

Outcome criterion_generalization() {
    g_lambda_runs.clear();
    for (uint64_t seed = 0; seed < 3; ++seed) g_lambda_runs.push_back(run_generalization(seed, 0.1, seed == 0));
    const GeneralizationRun& r = g_lambda_runs[0];
    const bool pass = r.mpjpe < 0.15 && r.mpjae < 25.0 && r.baseline_mpjpe >= 5.0 * r.mpjpe &&
                      r.baseline_mpjae >= 5.0 * r.mpjae;
    return {pass, "held-out MPJPE " + fmt(r.mpjpe) + " (< 0.15, baseline " + fmt(r.baseline_mpjpe) + "), MPJAE " +
                      fmt(r.mpjae) + " deg (< 25, baseline " + fmt(r.baseline_mpjae) + ")"};
}

Outcome criterion_bone_constraint() {
    if (g_lambda_runs.size() != 3) {
        g_lambda_runs.clear();
        for (uint64_t seed = 0; seed < 3; ++seed) g_lambda_runs.push_back(run_generalization(seed, 0.1, false));
    }
    g_nolambda_runs.clear();
    for (uint64_t seed = 0; seed < 3; ++seed) g_nolambda_runs.push_back(run_generalization(seed, 0.0, false));
    double with_bone = 0.0, without_bone = 0.0;
    for (int i = 0; i < 3; ++i) {
        with_bone += g_lambda_runs[static_cast<size_t>(i)].mpjae / 3.0;
        without_bone += g_nolambda_runs[static_cast<size_t>(i)].mpjae / 3.0;
    }
    // Soft gate: +1 degree regression allowed for seed variance.
    const bool pass = with_bone <= without_bone + 1.0;
    return {pass, "mean held-out MPJAE: lambda=0.1 -> " + fmt(with_bone) + " deg, lambda=0 -> " + fmt(without_bone) +
                      " deg (tolerance +1 deg)"};
}

// ---- criterion 9: metric closed forms ---------------------------------------

Outcome criterion_metrics() {
    SkeletonTopology pair;
    pair.joint_names = {"a", "b"};
    pair.parents = {0, 0};
    pair.root = 0;
    SkeletonTopology chain;
    chain.joint_names = {"a", "b", "c"};
    chain.parents = {0, 0, 1};
    chain.root = 0;

    const auto seq1 = [](std::vector<Vec3> joints) {
        PoseSequence s;
        Pose3D p;
        p.joints = std::move(joints);
        s.frames.push_back(p);
        s.topology_id = "custom";
        return s;
    };

    // MPJPE: one joint off by (3,4,0) -> 2.5; translation -> ||c||.
    const PoseSequence a = seq1({{0, 0, 0}, {1, 0, 0}});
    const PoseSequence b = seq1({{0, 0, 0}, {4, 4, 0}});
    if (std::abs(mpjpe(a, a)) > 0.0) return {false, "mpjpe(self) != 0"};
    if (std::abs(mpjpe(a, b) - 2.5) > 1e-12) return {false, "mpjpe offset example failed"};
    PoseSequence shifted = a;
    for (auto& f : shifted.frames)
        for (auto& v : f.joints) {
            v[0] += 2.0;
            v[1] += 1.0;
            v[2] += 2.0;
        }
    if (std::abs(mpjpe(a, shifted) - 3.0) > 1e-12) return {false, "mpjpe translation example failed"};

    // MPJAE: identical -> 0; one of two bones rotated 90 -> 45; antiparallel -> 180 contribution.
    const PoseSequence t0 = seq1({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}});
    const PoseSequence rot = seq1({{0, 0, 0}, {0, 1, 0}, {0, 2, 0}});
    if (std::abs(mpjae_degrees(t0, t0, chain)) > 1e-9) return {false, "mpjae(self) != 0"};
    if (std::abs(mpjae_degrees(t0, rot, chain) - 45.0) > 1e-9) return {false, "mpjae 90-degree example failed"};
    const PoseSequence anti = seq1({{0, 0, 0}, {-1, 0, 0}, {-1, 1, 0}});
    if (std::abs(mpjae_degrees(t0, anti, chain) - 90.0) > 1e-9) return {false, "mpjae antiparallel example failed"};

    // FID: identical sets -> < 1e-6; mean shift -> ||d||^2; diagonal -> sum (sqrt a - sqrt b)^2.
    const auto fixture = [&](const Vec3& mu, double vx, double vy) {
        std::vector<PoseSequence> set;
        PoseSequence s;
        s.topology_id = "custom";
        const double ax = std::sqrt(3.0 * vx / 4.0);
        const double ay = std::sqrt(3.0 * vy / 4.0);
        for (int i = 0; i < 4; ++i) {
            Pose3D p;
            const double sx = (i % 2 == 0) ? 1.0 : -1.0;
            const double sy = (i < 2) ? 1.0 : -1.0;
            p.joints = {{0, 0, 0}, {mu[0] + sx * ax, mu[1] + sy * ay, mu[2]}};
            s.frames.push_back(std::move(p));
        }
        set.push_back(std::move(s));
        return set;
    };
    const auto base = fixture({0, 0, 0}, 1.0, 2.0);
    if (!(fid(base, base, pair) < 1e-6)) return {false, "fid(self) >= 1e-6"};
    const auto moved = fixture({0.3, -0.4, 1.0}, 1.0, 2.0);
    const double want_mean = 0.3 * 0.3 + 0.4 * 0.4 + 1.0;
    if (std::abs(fid(base, moved, pair) - want_mean) > 1e-6) return {false, "fid mean-shift example failed"};
    const auto da = fixture({0, 0, 0}, 1.0, 4.0);
    const auto db = fixture({0, 0, 0}, 9.0, 1.0);
    if (std::abs(fid(da, db, pair) - 5.0) > 1e-6) return {false, "fid diagonal example failed"};

    return {true, "all closed-form MPJPE/MPJAE/FID examples within tolerance"};
}

// ---- criterion 10: CLI determinism ------------------------------------------

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

Outcome criterion_determinism() {
    const fs::path dir = fs::temp_directory_path() / "sign_idd_acceptance";
    fs::create_directories(dir);
    const fs::path corpus = dir / "corpus";
    fs::remove_all(corpus);
    const std::string bin = SIGN_IDD_BIN;
    const auto run = [&](const std::string& args) {
        const std::string cmd = bin + " " + args + " > /dev/null 2>&1";
        return WEXITSTATUS(std::system(cmd.c_str()));
    };
    if (run("gen-corpus --out " + corpus.string() + " --vocab 5 --samples 6 --frames-per-gloss 6 --seed 3") != 0)
        return {false, "gen-corpus failed"};
    const std::string train_args = "train --corpus " + corpus.string() +
                                   " --epochs 3 --batch 3 --schedule-T 50 --d-model 16 --heads 2 --gloss-layers 1 "
                                   "--seed 11 --checkpoint ";
    if (run(train_args + (dir / "m1.ckpt").string() + " --loss-csv " + (dir / "l1.csv").string()) != 0)
        return {false, "train run 1 failed"};
    if (run(train_args + (dir / "m2.ckpt").string() + " --loss-csv " + (dir / "l2.csv").string()) != 0)
        return {false, "train run 2 failed"};
    if (slurp(dir / "m1.ckpt") != slurp(dir / "m2.ckpt")) return {false, "checkpoints differ between identical runs"};
    if (slurp(dir / "l1.csv") != slurp(dir / "l2.csv")) return {false, "loss CSVs differ between identical runs"};

    const std::string gen_args = "generate --checkpoint " + (dir / "m1.ckpt").string() +
                                 " --gloss \"g0 g2\" --steps 5 --seed 21 --out ";
    if (run(gen_args + (dir / "p1.json").string()) != 0) return {false, "generate run 1 failed"};
    if (run(gen_args + (dir / "p2.json").string()) != 0) return {false, "generate run 2 failed"};
    if (slurp(dir / "p1.json") != slurp(dir / "p2.json")) return {false, "generated poses differ between identical runs"};
    return {true, "byte-identical checkpoint, loss CSV, and generated pose across repeat runs"};
}

}  // namespace

int main() {
    std::vector<Check> checks = {
        {1, "disentanglement round trip", criterion_roundtrip},
        {2, "direction invariants", criterion_direction_invariants},
        {3, "cosine schedule", criterion_schedule},
        {4, "sampler algebra", criterion_sampler_algebra},
        {5, "gradient correctness", criterion_gradients},
        {6, "overfit learning", criterion_overfit},
        {7, "generalization smoke test", criterion_generalization},
        {8, "bone-constraint effect", criterion_bone_constraint},
        {9, "metric correctness", criterion_metrics},
        {10, "determinism", criterion_determinism},
    };

    std::vector<int> only;
    if (const char* env = std::getenv("SIGN_IDD_ACCEPT_ONLY")) {
        std::istringstream in(env);
        std::string tok;
        while (std::getline(in, tok, ',')) only.push_back(std::atoi(tok.c_str()));
    }

    int failures = 0;
    for (const Check& check : checks) {
        if (!only.empty() && std::find(only.begin(), only.end(), check.id) == only.end()) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = check.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %2d (%s): %s  [%.1f s]\n", outcome.pass ? "PASS" : "FAIL", check.id,
                    check.name.c_str(), outcome.detail.c_str(), secs);
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    if (failures > 0) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all criteria passed\n");
    return 0;
}
