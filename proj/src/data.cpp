#include "signidd/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "signidd/rng.hpp"

namespace fs = std::filesystem;

namespace signidd {

PoseArray to_array(const PoseSequence& seq) {
    PoseArray arr = PoseArray::zeros(seq.frame_count(), seq.joint_count());
    for (int s = 0; s < arr.S; ++s)
        for (int j = 0; j < arr.J; ++j)
            for (int c = 0; c < 3; ++c) arr.at(s, j, c) = seq.frames[static_cast<size_t>(s)].joints[static_cast<size_t>(j)][static_cast<size_t>(c)];
    return arr;
}

PoseSequence from_array(const PoseArray& arr, double fps, std::string topology_id) {
    PoseSequence seq;
    seq.fps = fps;
    seq.topology_id = std::move(topology_id);
    seq.frames.resize(static_cast<size_t>(arr.S));
    for (int s = 0; s < arr.S; ++s) {
        auto& frame = seq.frames[static_cast<size_t>(s)];
        frame.joints.resize(static_cast<size_t>(arr.J));
        for (int j = 0; j < arr.J; ++j)
            for (int c = 0; c < 3; ++c) frame.joints[static_cast<size_t>(j)][static_cast<size_t>(c)] = arr.at(s, j, c);
    }
    return seq;
}

PoseSequence read_pose_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("pose file: cannot open " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        throw std::runtime_error("pose file: parse failure in " + path + ": " + e.what());
    }
    PoseSequence seq;
    try {
        seq.topology_id = doc.at("topology").get<std::string>();
        seq.fps = doc.at("fps").get<double>();
    } catch (const std::exception& e) {
        throw std::runtime_error("pose file: malformed header in " + path + ": " + e.what());
    }
    const auto& frames = doc.at("frames");
    if (!frames.is_array() || frames.empty()) throw std::runtime_error("pose file: S >= 1 violated in " + path);
    int expected_j = -1;
    if (is_preset_topology(seq.topology_id)) expected_j = preset_topology(seq.topology_id).joint_count();
    for (size_t s = 0; s < frames.size(); ++s) {
        const auto& frame = frames[s];
        if (!frame.is_array()) throw std::runtime_error("pose file: frame " + std::to_string(s) + " is not an array");
        if (expected_j < 0) expected_j = static_cast<int>(frame.size());
        if (static_cast<int>(frame.size()) != expected_j)
            throw std::runtime_error("pose file: frame " + std::to_string(s) + " has " + std::to_string(frame.size()) +
                                     " joints, expected " + std::to_string(expected_j));
        Pose3D pose;
        pose.joints.resize(frame.size());
        for (size_t j = 0; j < frame.size(); ++j) {
            const auto& joint = frame[j];
            if (!joint.is_array() || joint.size() != 3)
                throw std::runtime_error("pose file: frame " + std::to_string(s) + " joint " + std::to_string(j) +
                                         " is not an [x,y,z] triple");
            for (size_t c = 0; c < 3; ++c) {
                const double v = joint[c].get<double>();
                if (!std::isfinite(v))
                    throw std::runtime_error("pose file: non-finite value at frame " + std::to_string(s) + " joint " +
                                             std::to_string(j));
                pose.joints[j][c] = v;
            }
        }
        seq.frames.push_back(std::move(pose));
    }
    return seq;
}

void write_pose_file(const PoseSequence& seq, const std::string& path) {
    if (seq.frames.empty()) throw std::runtime_error("pose file: S >= 1 violated (empty sequence)");
    nlohmann::json doc;
    doc["topology"] = seq.topology_id;
    doc["fps"] = seq.fps;
    nlohmann::json frames = nlohmann::json::array();
    for (const Pose3D& pose : seq.frames) {
        nlohmann::json frame = nlohmann::json::array();
        for (const Vec3& joint : pose.joints) frame.push_back({joint[0], joint[1], joint[2]});
        frames.push_back(std::move(frame));
    }
    doc["frames"] = std::move(frames);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("pose file: cannot write " + path);
    out << doc.dump() << "\n";
}

std::vector<std::string> read_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("vocab: cannot open " + path);
    std::vector<std::string> vocab;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) vocab.push_back(line);
    }
    if (vocab.empty()) throw std::runtime_error("vocab: no tokens in " + path);
    return vocab;
}

void write_vocab(const std::vector<std::string>& vocab, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("vocab: cannot write " + path);
    for (const auto& token : vocab) out << token << "\n";
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("manifest: cannot open " + path);
    std::vector<ManifestEntry> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(line);
            ManifestEntry e;
            e.gloss = doc.at("gloss").get<std::vector<std::string>>();
            e.pose_file = doc.at("pose_file").get<std::string>();
            entries.push_back(std::move(e));
        } catch (const std::exception& ex) {
            throw std::runtime_error("manifest: bad line " + std::to_string(line_no) + " in " + path + ": " + ex.what());
        }
    }
    return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path);
    for (const auto& e : entries) {
        nlohmann::json doc;
        doc["gloss"] = e.gloss;
        doc["pose_file"] = e.pose_file;
        out << doc.dump() << "\n";
    }
}

namespace {

Vec3 normalize_or_zero(const Vec3& v) {
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n < kDegenerateBoneLength) return {0.0, 0.0, 0.0};
    return {v[0] / n, v[1] / n, v[2] / n};
}

// Two unit vectors orthogonal to d (and to each other).
std::pair<Vec3, Vec3> orthonormal_frame(const Vec3& d) {
    const Vec3 pick = std::abs(d[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
    Vec3 e1 = {d[1] * pick[2] - d[2] * pick[1], d[2] * pick[0] - d[0] * pick[2], d[0] * pick[1] - d[1] * pick[0]};
    e1 = normalize_or_zero(e1);
    const Vec3 e2 = {d[1] * e1[2] - d[2] * e1[1], d[2] * e1[0] - d[0] * e1[2], d[0] * e1[1] - d[1] * e1[0]};
    return {e1, e2};
}

constexpr int kFadeFrames = 3;
constexpr uint64_t kMotifSalt = 0x5349474e44445349ull;

}  // namespace

Pose3D synthesis_rest_pose(const SkeletonTopology& topo, const std::string& topology_id) {
    if (is_preset_topology(topology_id)) {
        Pose3D rest = preset_rest_pose(topology_id);
        if (rest.joint_count() != topo.joint_count())
            throw std::runtime_error("synthesis: preset rest pose does not match topology");
        return rest;
    }
    // Procedural fallback for custom topologies: hash-derived bone directions
    // at a fixed length, assembled over the tree, then height-normalized with
    // a clamped scale so bones stay non-degenerate.
    Pose4D attrs;
    attrs.rows.assign(static_cast<size_t>(topo.joint_count()), Bone4{0, 0, 0, 0});
    for (const auto& [parent, child] : bone_endpoints(topo)) {
        (void)parent;
        const uint64_t key = mix_hash(kMotifSalt, static_cast<uint64_t>(child));
        Vec3 d = {hash_unit(key) - 0.5, -(0.5 + 0.5 * hash_unit(key + 1)), hash_unit(key + 2) - 0.5};
        d = normalize_or_zero(d);
        attrs.rows[static_cast<size_t>(child)] = {d[0], d[1], d[2], 0.25};
    }
    Pose3D rest = reassemble(attrs, {0.0, 0.0, 0.0}, topo);
    double lo = rest.joints[0][1], hi = lo;
    for (const auto& v : rest.joints) {
        lo = std::min(lo, v[1]);
        hi = std::max(hi, v[1]);
    }
    const double scale = std::clamp(1.0 / std::max(hi - lo, 1e-6), 0.2, 5.0);
    for (auto& v : rest.joints)
        for (double& c : v) c *= scale;
    return rest;
}

Pose3D motif_frame(int token, int frame, int frames_per_gloss, const SkeletonTopology& topo, const Pose3D& rest) {
    const Pose4D rest_attrs = disentangle(rest, topo);
    Pose4D attrs;
    attrs.rows.assign(static_cast<size_t>(topo.joint_count()), Bone4{0, 0, 0, 0});
    const double phase = static_cast<double>(frame) / static_cast<double>(frames_per_gloss);
    for (const auto& [parent, child] : bone_endpoints(topo)) {
        (void)parent;
        const Bone4& base = rest_attrs.rows[static_cast<size_t>(child)];
        const Vec3 base_dir = {base[0], base[1], base[2]};
        const auto [e1, e2] = orthonormal_frame(base_dir);
        const uint64_t key = mix_hash(static_cast<uint64_t>(token), static_cast<uint64_t>(child), kMotifSalt);
        const double len_mul = 0.92 + 0.2 * hash_unit(key);
        const double a1 = 0.15 + 0.40 * hash_unit(key + 1);
        const double a2 = 0.15 + 0.40 * hash_unit(key + 2);
        const double cyc1 = 0.5 + 1.5 * hash_unit(key + 3);
        const double cyc2 = 0.5 + 1.5 * hash_unit(key + 4);
        const double ph1 = 2.0 * 3.14159265358979323846 * hash_unit(key + 5);
        const double ph2 = 2.0 * 3.14159265358979323846 * hash_unit(key + 6);
        const double s1 = std::sin(2.0 * 3.14159265358979323846 * cyc1 * phase + ph1);
        const double s2 = std::sin(2.0 * 3.14159265358979323846 * cyc2 * phase + ph2);
        // The oscillation lives in the plane orthogonal to the rest direction,
        // so the pre-normalization vector has norm >= 1 and never degenerates.
        Vec3 d = {base_dir[0] + a1 * s1 * e1[0] + a2 * s2 * e2[0],
                  base_dir[1] + a1 * s1 * e1[1] + a2 * s2 * e2[1],
                  base_dir[2] + a1 * s1 * e1[2] + a2 * s2 * e2[2]};
        d = normalize_or_zero(d);
        attrs.rows[static_cast<size_t>(child)] = {d[0], d[1], d[2], base[3] * len_mul};
    }
    return reassemble(attrs, {0.0, 0.0, 0.0}, topo);
}

Corpus generate_synthetic_corpus(const SynthOptions& opt, const SkeletonTopology& topo,
                                 const std::string& topology_id) {
    if (opt.vocab_size < 2) throw std::invalid_argument("gen-corpus: vocab_size >= 2 required");
    if (opt.samples < 1) throw std::invalid_argument("gen-corpus: samples >= 1 required");
    if (opt.frames_per_gloss <= kFadeFrames)
        throw std::invalid_argument("gen-corpus: frames_per_gloss must exceed the 3-frame cross-fade");
    if (opt.min_tokens < 1 || opt.max_tokens < opt.min_tokens)
        throw std::invalid_argument("gen-corpus: bad token count range");
    validate_topology(topo);

    Corpus corpus;
    corpus.vocabulary.reserve(static_cast<size_t>(opt.vocab_size));
    for (int v = 0; v < opt.vocab_size; ++v) corpus.vocabulary.push_back("g" + std::to_string(v));

    const Pose3D rest = synthesis_rest_pose(topo, topology_id);
    Rng rng(opt.seed);
    corpus.samples.reserve(static_cast<size_t>(opt.samples));
    for (int i = 0; i < opt.samples; ++i) {
        CorpusSample sample;
        const int n_tokens = rng.uniform_int(opt.min_tokens, opt.max_tokens);
        sample.gloss.tokens.reserve(static_cast<size_t>(n_tokens));
        for (int k = 0; k < n_tokens; ++k) sample.gloss.tokens.push_back(rng.uniform_int(0, opt.vocab_size - 1));

        sample.pose.fps = opt.fps;
        sample.pose.topology_id = topology_id;
        for (int k = 0; k < n_tokens; ++k) {
            const int token = sample.gloss.tokens[static_cast<size_t>(k)];
            for (int f = 0; f < opt.frames_per_gloss; ++f) {
                Pose3D frame = motif_frame(token, f, opt.frames_per_gloss, topo, rest);
                if (k > 0 && f < kFadeFrames) {
                    // Linear cross-fade from the previous motif's last frame.
                    const Pose3D& prev = sample.pose.frames[static_cast<size_t>(k * opt.frames_per_gloss) - 1];
                    const double w = static_cast<double>(f + 1) / (kFadeFrames + 1);
                    for (size_t j = 0; j < frame.joints.size(); ++j)
                        for (size_t c = 0; c < 3; ++c)
                            frame.joints[j][c] = (1.0 - w) * prev.joints[j][c] + w * frame.joints[j][c];
                }
                sample.pose.frames.push_back(std::move(frame));
            }
        }
        corpus.samples.push_back(std::move(sample));
    }
    return corpus;
}

void write_corpus_dir(const Corpus& corpus, const SkeletonTopology& topo, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "poses");
    save_topology(topo, (fs::path(dir) / "topology.json").string());
    write_vocab(corpus.vocabulary, (fs::path(dir) / "vocab.txt").string());
    std::vector<ManifestEntry> entries;
    entries.reserve(corpus.samples.size());
    for (size_t i = 0; i < corpus.samples.size(); ++i) {
        const CorpusSample& s = corpus.samples[i];
        char name[64];
        std::snprintf(name, sizeof(name), "poses/sample_%04zu.json", i);
        write_pose_file(s.pose, (fs::path(dir) / name).string());
        ManifestEntry e;
        e.pose_file = name;
        for (int tok : s.gloss.tokens) e.gloss.push_back(corpus.vocabulary[static_cast<size_t>(tok)]);
        entries.push_back(std::move(e));
    }
    write_manifest(entries, (fs::path(dir) / "manifest.jsonl").string());
}

LoadedCorpus load_corpus_dir(const std::string& dir) {
    LoadedCorpus loaded;
    loaded.topology = load_topology((fs::path(dir) / "topology.json").string());
    loaded.corpus.vocabulary = read_vocab((fs::path(dir) / "vocab.txt").string());
    const auto entries = read_manifest((fs::path(dir) / "manifest.jsonl").string());
    loaded.corpus.samples.reserve(entries.size());
    for (const ManifestEntry& e : entries) {
        CorpusSample s;
        for (const std::string& token : e.gloss) {
            const auto it = std::find(loaded.corpus.vocabulary.begin(), loaded.corpus.vocabulary.end(), token);
            if (it == loaded.corpus.vocabulary.end())
                throw std::runtime_error("corpus: token '" + token + "' missing from vocabulary");
            s.gloss.tokens.push_back(static_cast<int>(it - loaded.corpus.vocabulary.begin()));
        }
        s.pose = read_pose_file((fs::path(dir) / e.pose_file).string());
        if (s.pose.joint_count() != loaded.topology.joint_count())
            throw std::runtime_error("corpus: pose " + e.pose_file + " joint count " +
                                     std::to_string(s.pose.joint_count()) + " does not match topology " +
                                     std::to_string(loaded.topology.joint_count()));
        loaded.topology_id = s.pose.topology_id;
        loaded.corpus.samples.push_back(std::move(s));
    }
    if (loaded.corpus.samples.empty()) throw std::runtime_error("corpus: no samples in " + dir);
    return loaded;
}

}  // namespace signidd
