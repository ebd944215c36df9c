#include "signidd/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "signidd/data.hpp"
#include "signidd/diffusion.hpp"
#include "signidd/eval.hpp"
#include "signidd/render.hpp"
#include "signidd/training.hpp"

namespace fs = std::filesystem;

namespace signidd {

namespace {

nlohmann::json load_config_file(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw std::runtime_error("config: parse failure in " + path + ": " + e.what());
    }
    return doc;
}

// Flags take precedence over the config file; the file fills in anything the
// command line left at its default.
template <typename T>
void apply_override(const CLI::App& cmd, const std::string& flag, const nlohmann::json& cfg, const std::string& key,
                    T& target) {
    if (cfg.contains(key) && cmd.count(flag) == 0) target = cfg.at(key).get<T>();
}

SkeletonTopology resolve_topology(const std::string& spec) {
    if (is_preset_topology(spec)) return preset_topology(spec);
    return load_topology(spec);
}

std::string topology_label(const std::string& spec) {
    if (is_preset_topology(spec)) return spec;
    return "custom";
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok) tokens.push_back(tok);
    return tokens;
}

void print_kv(const char* key, const std::string& value) { std::cout << "  " << key << " = " << value << "\n"; }
void print_kv(const char* key, double value) { std::cout << "  " << key << " = " << value << "\n"; }
void print_kv(const char* key, int value) { std::cout << "  " << key << " = " << value << "\n"; }
void print_kv(const char* key, uint64_t value) { std::cout << "  " << key << " = " << value << "\n"; }

int cmd_gen_corpus(const CLI::App& cmd, const nlohmann::json& cfg, std::string out_dir, SynthOptions opt,
                   std::string topology_spec) {
    apply_override(cmd, "--out", cfg, "out", out_dir);
    apply_override(cmd, "--vocab", cfg, "vocab", opt.vocab_size);
    apply_override(cmd, "--samples", cfg, "samples", opt.samples);
    apply_override(cmd, "--frames-per-gloss", cfg, "frames_per_gloss", opt.frames_per_gloss);
    apply_override(cmd, "--min-tokens", cfg, "min_tokens", opt.min_tokens);
    apply_override(cmd, "--max-tokens", cfg, "max_tokens", opt.max_tokens);
    apply_override(cmd, "--fps", cfg, "fps", opt.fps);
    apply_override(cmd, "--seed", cfg, "seed", opt.seed);
    apply_override(cmd, "--topology", cfg, "topology", topology_spec);
    std::cout << "gen-corpus config:\n";
    print_kv("out", out_dir);
    print_kv("vocab", opt.vocab_size);
    print_kv("samples", opt.samples);
    print_kv("frames_per_gloss", opt.frames_per_gloss);
    print_kv("min_tokens", opt.min_tokens);
    print_kv("max_tokens", opt.max_tokens);
    print_kv("topology", topology_spec);
    print_kv("seed", opt.seed);

    const SkeletonTopology topo = resolve_topology(topology_spec);
    const Corpus corpus = generate_synthetic_corpus(opt, topo, topology_label(topology_spec));
    write_corpus_dir(corpus, topo, out_dir);
    std::cout << "wrote " << corpus.samples.size() << " samples, vocabulary of " << corpus.vocabulary.size() << " to "
              << out_dir << "\n";
    return 0;
}

int cmd_train(const CLI::App& cmd, const nlohmann::json& cfg_json, std::string corpus_dir, std::string checkpoint,
              std::string loss_csv, TrainConfig cfg, AcdConfig acd_cfg) {
    apply_override(cmd, "--corpus", cfg_json, "corpus", corpus_dir);
    apply_override(cmd, "--checkpoint", cfg_json, "checkpoint", checkpoint);
    apply_override(cmd, "--loss-csv", cfg_json, "loss_csv", loss_csv);
    apply_override(cmd, "--epochs", cfg_json, "epochs", cfg.epochs);
    apply_override(cmd, "--batch", cfg_json, "batch", cfg.batch_size);
    apply_override(cmd, "--lr", cfg_json, "lr", cfg.learning_rate);
    apply_override(cmd, "--lambda", cfg_json, "lambda", cfg.lambda_bone);
    apply_override(cmd, "--schedule-T", cfg_json, "schedule_T", cfg.schedule_T);
    apply_override(cmd, "--seed", cfg_json, "seed", cfg.seed);
    apply_override(cmd, "--d-model", cfg_json, "d_model", acd_cfg.d_model);
    apply_override(cmd, "--heads", cfg_json, "heads", acd_cfg.heads);
    apply_override(cmd, "--gloss-layers", cfg_json, "gloss_layers", acd_cfg.gloss_layers);
    apply_override(cmd, "--ff-hidden", cfg_json, "ff_hidden", acd_cfg.ff_hidden);
    std::cout << "train config:\n";
    print_kv("corpus", corpus_dir);
    print_kv("checkpoint", checkpoint);
    print_kv("loss_csv", loss_csv);
    print_kv("epochs", cfg.epochs);
    print_kv("batch", cfg.batch_size);
    print_kv("lr", cfg.learning_rate);
    print_kv("lambda", cfg.lambda_bone);
    print_kv("schedule_T", cfg.schedule_T);
    print_kv("d_model", acd_cfg.d_model);
    print_kv("heads", acd_cfg.heads);
    print_kv("gloss_layers", acd_cfg.gloss_layers);
    print_kv("seed", cfg.seed);

    const LoadedCorpus loaded = load_corpus_dir(corpus_dir);
    AcdModel model = AcdModel::init(acd_cfg, loaded.topology, loaded.topology_id, loaded.corpus.vocabulary,
                                    cfg.schedule_T, cfg.seed);
    std::cout << "model parameters: " << model.parameter_count() << "\n";
    const NoiseSchedule sched = build_cosine_schedule(cfg.schedule_T);
    const auto history = train(loaded.corpus, model, sched, cfg);
    model.save(checkpoint);
    if (!loss_csv.empty()) write_loss_csv(history, loss_csv);
    const EpochLoss& last = history.back();
    std::printf("final losses: total=%.6f joint=%.6f bone=%.6f\n", last.total, last.joint, last.bone);
    return 0;
}

int cmd_generate(const CLI::App& cmd, const nlohmann::json& cfg, std::string checkpoint, std::string gloss_text,
                 std::string out_path, int steps, uint64_t seed) {
    apply_override(cmd, "--checkpoint", cfg, "checkpoint", checkpoint);
    apply_override(cmd, "--gloss", cfg, "gloss", gloss_text);
    apply_override(cmd, "--out", cfg, "out", out_path);
    apply_override(cmd, "--steps", cfg, "steps", steps);
    apply_override(cmd, "--seed", cfg, "seed", seed);
    std::cout << "generate config:\n";
    print_kv("checkpoint", checkpoint);
    print_kv("gloss", gloss_text);
    print_kv("out", out_path);
    print_kv("steps", steps);
    print_kv("seed", seed);

    const AcdModel model = AcdModel::load(checkpoint);
    GlossSequence gloss;
    for (const std::string& token : split_tokens(gloss_text)) {
        const int idx = model.vocab_index(token);
        if (idx < 0) throw std::runtime_error("generate: unknown token '" + token + "'");
        gloss.tokens.push_back(idx);
    }
    if (gloss.tokens.empty()) throw std::runtime_error("generate: empty gloss sequence");
    const NoiseSchedule sched = build_cosine_schedule(model.schedule_T);
    const PoseSequence seq = sample(gloss, model, sched, steps, seed);
    write_pose_file(seq, out_path);
    std::cout << "wrote " << out_path << " with S=" << seq.frame_count() << " J=" << seq.joint_count() << "\n";
    return 0;
}

int cmd_evaluate(const CLI::App& cmd, const nlohmann::json& cfg, std::string ref_manifest, std::string pred_manifest,
                 std::string topology_spec, std::string out_path) {
    apply_override(cmd, "--ref", cfg, "ref", ref_manifest);
    apply_override(cmd, "--pred", cfg, "pred", pred_manifest);
    apply_override(cmd, "--topology", cfg, "topology", topology_spec);
    apply_override(cmd, "--out", cfg, "out", out_path);
    if (topology_spec.empty()) {
        const fs::path sibling = fs::path(ref_manifest).parent_path() / "topology.json";
        if (!fs::exists(sibling))
            throw std::runtime_error("evaluate: --topology not given and " + sibling.string() + " not found");
        topology_spec = sibling.string();
    }
    std::cout << "evaluate config:\n";
    print_kv("ref", ref_manifest);
    print_kv("pred", pred_manifest);
    print_kv("topology", topology_spec);

    const SkeletonTopology topo = resolve_topology(topology_spec);
    const auto ref_entries = read_manifest(ref_manifest);
    const auto pred_entries = read_manifest(pred_manifest);
    if (ref_entries.size() != pred_entries.size())
        throw std::runtime_error("evaluate: manifests differ in sample count (" + std::to_string(ref_entries.size()) +
                                 " vs " + std::to_string(pred_entries.size()) + ")");
    const fs::path ref_base = fs::path(ref_manifest).parent_path();
    const fs::path pred_base = fs::path(pred_manifest).parent_path();
    std::vector<PoseSequence> ref_seqs, pred_seqs;
    for (size_t i = 0; i < ref_entries.size(); ++i) {
        ref_seqs.push_back(read_pose_file((ref_base / ref_entries[i].pose_file).string()));
        pred_seqs.push_back(read_pose_file((pred_base / pred_entries[i].pose_file).string()));
    }
    const MetricReport report = evaluate_sets(ref_seqs, pred_seqs, topo);
    const std::string json_text = metric_report_json(report);
    std::cout << json_text << "\n";
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw std::runtime_error("evaluate: cannot write " + out_path);
        out << json_text << "\n";
    }
    return 0;
}

int cmd_roundtrip(const CLI::App& cmd, const nlohmann::json& cfg, std::vector<std::string> pose_files,
                  std::string manifest, std::string topology_spec) {
    apply_override(cmd, "--manifest", cfg, "manifest", manifest);
    apply_override(cmd, "--topology", cfg, "topology", topology_spec);
    if (!manifest.empty()) {
        const fs::path base = fs::path(manifest).parent_path();
        for (const ManifestEntry& e : read_manifest(manifest)) pose_files.push_back((base / e.pose_file).string());
        if (topology_spec.empty()) {
            const fs::path sibling = fs::path(manifest).parent_path() / "topology.json";
            if (fs::exists(sibling)) topology_spec = sibling.string();
        }
    }
    if (pose_files.empty()) throw std::runtime_error("roundtrip: no pose files given");
    std::cout << "roundtrip config:\n";
    print_kv("files", static_cast<int>(pose_files.size()));
    print_kv("topology", topology_spec.empty() ? std::string("(from pose files)") : topology_spec);

    double max_dev = 0.0;
    for (const std::string& path : pose_files) {
        const PoseSequence seq = read_pose_file(path);
        const SkeletonTopology topo =
            topology_spec.empty() ? resolve_topology(seq.topology_id) : resolve_topology(topology_spec);
        if (seq.joint_count() != topo.joint_count())
            throw std::runtime_error("roundtrip: " + path + " joint count does not match topology");
        for (const Pose3D& frame : seq.frames) {
            const Pose3D rebuilt =
                reassemble(disentangle(frame, topo), frame.joints[static_cast<size_t>(topo.root)], topo);
            for (size_t j = 0; j < frame.joints.size(); ++j)
                for (size_t c = 0; c < 3; ++c)
                    max_dev = std::max(max_dev, std::abs(rebuilt.joints[j][c] - frame.joints[j][c]));
        }
    }
    std::printf("max coordinate deviation: %.3e over %zu files\n", max_dev, pose_files.size());
    if (max_dev > 1e-6) {
        std::cout << "roundtrip: FAIL (deviation above 1e-6)\n";
        return 2;
    }
    std::cout << "roundtrip: PASS\n";
    return 0;
}

int cmd_render(const CLI::App& cmd, const nlohmann::json& cfg, std::string pose_path, std::string frames_text,
               std::string out_dir, std::string compare_path, std::string topology_spec) {
    apply_override(cmd, "--pose", cfg, "pose", pose_path);
    apply_override(cmd, "--frames", cfg, "frames", frames_text);
    apply_override(cmd, "--out-dir", cfg, "out_dir", out_dir);
    apply_override(cmd, "--compare", cfg, "compare", compare_path);
    apply_override(cmd, "--topology", cfg, "topology", topology_spec);
    std::cout << "render config:\n";
    print_kv("pose", pose_path);
    print_kv("frames", frames_text);
    print_kv("out_dir", out_dir);
    print_kv("compare", compare_path.empty() ? std::string("(none)") : compare_path);

    const PoseSequence seq = read_pose_file(pose_path);
    const SkeletonTopology topo =
        topology_spec.empty() ? resolve_topology(seq.topology_id) : resolve_topology(topology_spec);
    PoseSequence reference;
    const bool has_reference = !compare_path.empty();
    if (has_reference) reference = read_pose_file(compare_path);

    std::vector<int> frames;
    {
        std::string token;
        std::istringstream in(frames_text);
        while (std::getline(in, token, ',')) {
            if (!token.empty()) frames.push_back(std::stoi(token));
        }
    }
    if (frames.empty()) throw std::runtime_error("render: no frames selected");
    fs::create_directories(out_dir);
    for (int frame : frames) {
        const std::string svg =
            render_frame_svg(seq, frame, topo, has_reference ? &reference : nullptr, RenderOptions{});
        char name[64];
        std::snprintf(name, sizeof(name), "frame_%04d.svg", frame);
        const std::string path = (fs::path(out_dir) / name).string();
        std::ofstream out(path);
        if (!out) throw std::runtime_error("render: cannot write " + path);
        out << svg;
    }
    std::cout << "wrote " << frames.size() << " SVG file(s) to " << out_dir << "\n";
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Sign-IDD: iconicity-disentangled diffusion for gloss-to-pose generation"};
    app.require_subcommand(1);

    std::string config_path;

    // gen-corpus
    auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic gloss->pose corpus");
    std::string gen_out = "corpus";
    SynthOptions synth;
    std::string gen_topology = "toy8";
    gen->add_option("--out", gen_out, "output directory");
    gen->add_option("--vocab", synth.vocab_size, "vocabulary size (>= 2)");
    gen->add_option("--samples", synth.samples, "number of samples");
    gen->add_option("--frames-per-gloss", synth.frames_per_gloss, "frames per gloss token");
    gen->add_option("--min-tokens", synth.min_tokens, "minimum tokens per sample");
    gen->add_option("--max-tokens", synth.max_tokens, "maximum tokens per sample");
    gen->add_option("--fps", synth.fps, "frames per second tag");
    gen->add_option("--seed", synth.seed, "random seed");
    gen->add_option("--topology", gen_topology, "topology preset name or JSON path");
    gen->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // train
    auto* tr = app.add_subcommand("train", "train the denoiser on a corpus");
    std::string tr_corpus = "corpus";
    std::string tr_checkpoint = "model.ckpt";
    std::string tr_loss_csv = "loss.csv";
    TrainConfig tr_cfg;
    AcdConfig tr_acd;
    tr->add_option("--corpus", tr_corpus, "corpus directory");
    tr->add_option("--checkpoint", tr_checkpoint, "checkpoint output path");
    tr->add_option("--loss-csv", tr_loss_csv, "loss history CSV path");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--batch", tr_cfg.batch_size, "batch size");
    tr->add_option("--lr", tr_cfg.learning_rate, "learning rate");
    tr->add_option("--lambda", tr_cfg.lambda_bone, "bone-constraint weight");
    tr->add_option("--schedule-T", tr_cfg.schedule_T, "diffusion timesteps");
    tr->add_option("--seed", tr_cfg.seed, "random seed");
    tr->add_option("--d-model", tr_acd.d_model, "model width");
    tr->add_option("--heads", tr_acd.heads, "attention heads");
    tr->add_option("--gloss-layers", tr_acd.gloss_layers, "gloss encoder layers");
    tr->add_option("--ff-hidden", tr_acd.ff_hidden, "feed-forward width (0 = 2*d_model)");
    tr->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // generate
    auto* ge = app.add_subcommand("generate", "sample a pose sequence from gloss tokens");
    std::string ge_checkpoint = "model.ckpt";
    std::string ge_gloss;
    std::string ge_out = "generated.json";
    int ge_steps = 5;
    uint64_t ge_seed = 0;
    ge->add_option("--checkpoint", ge_checkpoint, "model checkpoint");
    ge->add_option("--gloss", ge_gloss, "space-separated gloss tokens");
    ge->add_option("--out", ge_out, "output pose file");
    ge->add_option("--steps", ge_steps, "inference refinement passes");
    ge->add_option("--seed", ge_seed, "random seed");
    ge->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "compute MPJPE/MPJAE/FID between two manifests");
    std::string ev_ref, ev_pred, ev_topology, ev_out;
    ev->add_option("--ref", ev_ref, "reference manifest")->required();
    ev->add_option("--pred", ev_pred, "prediction manifest")->required();
    ev->add_option("--topology", ev_topology, "topology preset name or JSON path");
    ev->add_option("--out", ev_out, "metric report JSON output path");
    ev->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // roundtrip
    auto* rt = app.add_subcommand("roundtrip", "check disentangle/reassemble on pose files");
    std::vector<std::string> rt_files;
    std::string rt_manifest, rt_topology;
    rt->add_option("--pose", rt_files, "pose file(s)");
    rt->add_option("--manifest", rt_manifest, "manifest whose pose files are checked");
    rt->add_option("--topology", rt_topology, "topology preset name or JSON path");
    rt->add_option("--config", config_path, "JSON config file (flags take precedence)");

    // render
    auto* re = app.add_subcommand("render", "render pose frames to SVG");
    std::string re_pose, re_frames = "0", re_out = "render", re_compare, re_topology;
    re->add_option("--pose", re_pose, "pose file")->required();
    re->add_option("--frames", re_frames, "comma-separated frame indices");
    re->add_option("--out-dir", re_out, "output directory");
    re->add_option("--compare", re_compare, "reference pose file for side-by-side panels");
    re->add_option("--topology", re_topology, "topology preset name or JSON path");
    re->add_option("--config", config_path, "JSON config file (flags take precedence)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << "error: " << e.what() << "\n";
        return e.get_exit_code();
    }

    try {
        const nlohmann::json cfg = load_config_file(config_path);
        if (gen->parsed()) return cmd_gen_corpus(*gen, cfg, gen_out, synth, gen_topology);
        if (tr->parsed()) return cmd_train(*tr, cfg, tr_corpus, tr_checkpoint, tr_loss_csv, tr_cfg, tr_acd);
        if (ge->parsed()) return cmd_generate(*ge, cfg, ge_checkpoint, ge_gloss, ge_out, ge_steps, ge_seed);
        if (ev->parsed()) return cmd_evaluate(*ev, cfg, ev_ref, ev_pred, ev_topology, ev_out);
        if (rt->parsed()) return cmd_roundtrip(*rt, cfg, rt_files, rt_manifest, rt_topology);
        if (re->parsed()) return cmd_render(*re, cfg, re_pose, re_frames, re_out, re_compare, re_topology);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cerr << "error: no subcommand\n";
    return 1;
}

}  // namespace signidd
