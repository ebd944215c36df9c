#include <cmath>

#include "doctest.h"
#include "signidd/rng.hpp"
#include "signidd/training.hpp"

using namespace signidd;

namespace {

SkeletonTopology chain2() {
    SkeletonTopology t;
    t.joint_names = {"root", "tip"};
    t.parents = {0, 0};
    t.root = 0;
    return t;
}

PoseArray from_values(int s, int j, std::vector<double> v) {
    PoseArray a;
    a.S = s;
    a.J = j;
    a.v = std::move(v);
    return a;
}

Corpus tiny_corpus(const SkeletonTopology& topo, int samples, int vocab, uint64_t seed) {
    SynthOptions opt;
    opt.vocab_size = vocab;
    opt.samples = samples;
    opt.frames_per_gloss = 6;
    opt.min_tokens = 1;
    opt.max_tokens = 2;
    opt.seed = seed;
    return generate_synthetic_corpus(opt, topo, "toy8");
}

}  // namespace

TEST_CASE("loss_joint: zero, constant offset, homogeneity") {
    const PoseArray target = from_values(1, 2, {0, 0, 0, 1, 2, 3});
    CHECK(loss_joint(target, target) == 0.0);

    PoseArray off = target;
    for (double& x : off.v) x += 0.5;
    CHECK(loss_joint(target, off) == doctest::Approx(0.5).epsilon(1e-12));

    PoseArray off2 = target;
    for (double& x : off2.v) x += 1.0;
    CHECK(loss_joint(target, off2) == doctest::Approx(2.0 * loss_joint(target, off)).epsilon(1e-12));

    CHECK_THROWS_AS(loss_joint(target, from_values(2, 2, std::vector<double>(12, 0.0))), std::invalid_argument);
}

TEST_CASE("loss_bone: zero on match, scale invariance, 180-degree flip = 4/3") {
    const SkeletonTopology topo = chain2();
    const PoseArray target = from_values(1, 2, {0, 0, 0, 0.6, 0.8, 0.0});
    CHECK(loss_bone(target, target, topo) == 0.0);

    PoseArray doubled = target;
    for (double& x : doubled.v) x *= 2.0;
    CHECK(loss_bone(target, doubled, topo) == doctest::Approx(0.0));

    // Bone direction negated: mean over 3 components of (2 d)^2 = 4/3 for a
    // unit direction (computed with the plain disentangle oracle).
    PoseArray flipped = from_values(1, 2, {0, 0, 0, -0.6, -0.8, 0.0});
    CHECK(loss_bone(target, flipped, topo) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("graph losses agree with the plain oracles") {
    const SkeletonTopology topo = preset_topology("toy8");
    Rng rng(31);
    PoseArray target = PoseArray::zeros(3, 8);
    PoseArray pred = PoseArray::zeros(3, 8);
    for (double& x : target.v) x = rng.normal();
    for (double& x : pred.v) x = rng.normal();
    const Tensor pred_t = Tensor::from({3, 24}, pred.v);
    CHECK(loss_joint_graph(target, pred_t).item() == doctest::Approx(loss_joint(target, pred)).epsilon(1e-12));
    CHECK(loss_bone_graph(target, pred_t, topo).item() == doctest::Approx(loss_bone(target, pred, topo)).epsilon(1e-12));
}

TEST_CASE("loss_total combines linearly") {
    const SkeletonTopology topo = chain2();
    const PoseArray target = from_values(1, 2, {0, 0, 0, 1, 0, 0});
    const PoseArray pred = from_values(1, 2, {0, 0, 0, 0.5, 0, 0});
    TrainConfig cfg;
    cfg.lambda_bone = 0.0;
    CHECK(loss_total(target, pred, topo, cfg) == doctest::Approx(loss_joint(target, pred)));
    cfg.lambda_bone = 0.1;
    CHECK(loss_total(target, pred, topo, cfg) ==
          doctest::Approx(loss_joint(target, pred) + 0.1 * loss_bone(target, pred, topo)));
    CHECK(loss_total(target, target, topo, cfg) == 0.0);
}

TEST_CASE("loss_total gradient matches finite differences away from the L1 kink") {
    const SkeletonTopology topo = preset_topology("toy8");
    Rng rng(40);
    PoseArray target = PoseArray::zeros(2, 8);
    for (double& x : target.v) x = rng.normal();
    // Prediction offset from the target by at least 5e-3 per coordinate.
    std::vector<double> pv(target.v.size());
    for (size_t i = 0; i < pv.size(); ++i) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        pv[i] = target.v[i] + sign * (5e-3 + 0.3 * rng.uniform());
    }
    Tensor pred = Tensor::from({2, 24}, pv, true);
    const auto objective = [&] {
        return add(loss_joint_graph(target, pred), scale(loss_bone_graph(target, pred, topo), 0.1));
    };
    GradCheckOptions opts;
    opts.step = 1e-6;
    CHECK(check_gradients(objective, std::vector<Tensor>{pred}, opts) < 1e-4);
}

TEST_CASE("duration table credits frames per token occurrence") {
    Corpus corpus;
    corpus.vocabulary = {"g0", "g1", "g2"};
    CorpusSample s1;
    s1.gloss.tokens = {0, 1};
    s1.pose.frames.resize(20);  // 10 frames each
    CorpusSample s2;
    s2.gloss.tokens = {0};
    s2.pose.frames.resize(14);
    corpus.samples = {s1, s2};
    const auto table = duration_table_from(corpus, 3);
    CHECK(table[0] == doctest::Approx(12.0));  // (10 + 14) / 2
    CHECK(table[1] == doctest::Approx(10.0));
    CHECK(table[2] == doctest::Approx((10.0 + 10.0 + 14.0) / 3.0));  // unseen -> global mean
}

TEST_CASE("training is deterministic and decreases the smoothed loss") {
    const SkeletonTopology topo = preset_topology("toy8");
    const Corpus corpus = tiny_corpus(topo, 8, 4, 3);
    AcdConfig acd;
    acd.d_model = 16;
    acd.heads = 2;
    acd.gloss_layers = 1;
    TrainConfig cfg;
    cfg.epochs = 60;
    cfg.batch_size = 4;
    cfg.schedule_T = 50;
    cfg.seed = 5;
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);

    AcdModel m1 = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, cfg.seed);
    const auto h1 = train(corpus, m1, sched, cfg);
    AcdModel m2 = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, cfg.seed);
    const auto h2 = train(corpus, m2, sched, cfg);
    REQUIRE(h1.size() == h2.size());
    for (size_t i = 0; i < h1.size(); ++i) {
        CHECK(h1[i].total == h2[i].total);
        CHECK(h1[i].joint == h2[i].joint);
        CHECK(h1[i].bone == h2[i].bone);
    }
    const auto p1 = m1.parameters();
    const auto p2 = m2.parameters();
    for (size_t i = 0; i < p1.size(); ++i)
        for (int k = 0; k < p1[i].size(); ++k)
            CHECK(p1[i].values()[static_cast<size_t>(k)] == p2[i].values()[static_cast<size_t>(k)]);

    // Window-10 trailing means strictly decrease over the first 50 epochs.
    const auto smoothed = [&](size_t end) {  // mean of epochs [end-10, end)
        double acc = 0.0;
        for (size_t i = end - 10; i < end; ++i) acc += h1[i].total;
        return acc / 10.0;
    };
    for (size_t end = 11; end <= 50; ++end) CHECK(smoothed(end) < smoothed(end - 1));

    // Duration table got filled for sampling.
    double total_duration = 0.0;
    for (double d : m1.duration_table) total_duration += d;
    CHECK(total_duration > 0.0);
}

TEST_CASE("training aborts with the batch index on divergence") {
    const SkeletonTopology topo = preset_topology("toy8");
    const Corpus corpus = tiny_corpus(topo, 4, 3, 9);
    AcdConfig acd;
    acd.d_model = 16;
    acd.heads = 2;
    acd.gloss_layers = 1;
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 2;
    cfg.schedule_T = 20;
    cfg.learning_rate = 1e200;  // overflows the unnormalized output head
    cfg.clip_norm = 0.0;        // clipping disabled so the blow-up is immediate
    cfg.seed = 1;
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);
    AcdModel model = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, 2);
    CHECK_THROWS_WITH_AS(train(corpus, model, sched, cfg), doctest::Contains("batch"), std::runtime_error);
}

TEST_CASE("lambda=0 keeps reporting the unweighted bone loss") {
    const SkeletonTopology topo = preset_topology("toy8");
    const Corpus corpus = tiny_corpus(topo, 4, 3, 11);
    AcdConfig acd;
    acd.d_model = 16;
    acd.heads = 2;
    acd.gloss_layers = 1;
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.schedule_T = 20;
    cfg.lambda_bone = 0.0;
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);
    AcdModel model = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, 4);
    const auto history = train(corpus, model, sched, cfg);
    for (const EpochLoss& e : history) {
        CHECK(e.bone > 0.0);                       // reported
        CHECK(e.total == doctest::Approx(e.joint));  // not applied
    }
}

TEST_CASE("training results are bit-identical across worker thread counts") {
    const SkeletonTopology topo = preset_topology("toy8");
    const Corpus corpus = tiny_corpus(topo, 6, 4, 13);
    AcdConfig acd;
    acd.d_model = 16;
    acd.heads = 2;
    acd.gloss_layers = 1;
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 3;
    cfg.schedule_T = 30;
    cfg.seed = 2;
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);

    setenv("SIGN_IDD_THREADS", "1", 1);
    AcdModel m1 = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, 3);
    const auto h1 = train(corpus, m1, sched, cfg);
    setenv("SIGN_IDD_THREADS", "3", 1);
    AcdModel m3 = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, 3);
    const auto h3 = train(corpus, m3, sched, cfg);
    unsetenv("SIGN_IDD_THREADS");

    REQUIRE(h1.size() == h3.size());
    for (size_t i = 0; i < h1.size(); ++i) CHECK(h1[i].total == h3[i].total);
    const auto p1 = m1.parameters();
    const auto p3 = m3.parameters();
    for (size_t i = 0; i < p1.size(); ++i)
        for (int k = 0; k < p1[i].size(); ++k)
            CHECK(p1[i].values()[static_cast<size_t>(k)] == p3[i].values()[static_cast<size_t>(k)]);
}

TEST_CASE("sampling is seed-deterministic with the duration-table length") {
    const SkeletonTopology topo = preset_topology("toy8");
    const Corpus corpus = tiny_corpus(topo, 6, 3, 21);
    AcdConfig acd;
    acd.d_model = 16;
    acd.heads = 2;
    acd.gloss_layers = 1;
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 3;
    cfg.schedule_T = 40;
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);
    AcdModel model = AcdModel::init(acd, topo, "toy8", corpus.vocabulary, cfg.schedule_T, 8);
    train(corpus, model, sched, cfg);

    const GlossSequence gloss{{0, 2}};
    const PoseSequence a = sample(gloss, model, sched, 5, 77);
    const PoseSequence b = sample(gloss, model, sched, 5, 77);
    REQUIRE(a.frame_count() == b.frame_count());
    CHECK(a.frame_count() == 12);  // 6 frames per gloss, 2 tokens
    CHECK(a.joint_count() == 8);
    for (int s = 0; s < a.frame_count(); ++s)
        for (int j = 0; j < 8; ++j)
            for (int c = 0; c < 3; ++c)
                CHECK(a.frames[static_cast<size_t>(s)].joints[static_cast<size_t>(j)][static_cast<size_t>(c)] ==
                      b.frames[static_cast<size_t>(s)].joints[static_cast<size_t>(j)][static_cast<size_t>(c)]);

    const PoseSequence other_seed = sample(gloss, model, sched, 5, 78);
    bool any_diff = false;
    for (int s = 0; s < a.frame_count() && !any_diff; ++s)
        for (int j = 0; j < 8 && !any_diff; ++j)
            if (a.frames[static_cast<size_t>(s)].joints[static_cast<size_t>(j)] !=
                other_seed.frames[static_cast<size_t>(s)].joints[static_cast<size_t>(j)])
                any_diff = true;
    CHECK(any_diff);
}
