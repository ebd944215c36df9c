#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "signidd/acd.hpp"
#include "signidd/disentangle.hpp"
#include "signidd/skeleton.hpp"

namespace signidd {

// S-frame pose video. All frames share one topology.
struct PoseSequence {
    std::vector<Pose3D> frames;
    double fps = 25.0;
    std::string topology_id;

    int frame_count() const { return static_cast<int>(frames.size()); }
    int joint_count() const { return frames.empty() ? 0 : frames.front().joint_count(); }
};

// Flat S x J x 3 buffer feeding the numeric pipeline.
struct PoseArray {
    int S = 0, J = 0;
    std::vector<double> v;

    static PoseArray zeros(int S, int J) { return {S, J, std::vector<double>(static_cast<size_t>(S) * J * 3, 0.0)}; }
    double& at(int s, int j, int c) { return v[(static_cast<size_t>(s) * J + j) * 3 + c]; }
    double at(int s, int j, int c) const { return v[(static_cast<size_t>(s) * J + j) * 3 + c]; }
};

PoseArray to_array(const PoseSequence& seq);
PoseSequence from_array(const PoseArray& arr, double fps, std::string topology_id);

// Pose file: UTF-8 JSON {"topology": string, "fps": number,
// "frames": [[[x,y,z] x J] x S]}. Round-trips losslessly (shortest
// round-trip float formatting).
PoseSequence read_pose_file(const std::string& path);
void write_pose_file(const PoseSequence& seq, const std::string& path);

// Vocabulary: newline-separated tokens, index = line number.
std::vector<std::string> read_vocab(const std::string& path);
void write_vocab(const std::vector<std::string>& vocab, const std::string& path);

// Corpus manifest: JSON lines, one {"gloss": [tokens], "pose_file": path}
// per line. pose_file paths are relative to the manifest's directory.
struct ManifestEntry {
    std::vector<std::string> gloss;
    std::string pose_file;
};
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

struct CorpusSample {
    GlossSequence gloss;
    PoseSequence pose;
};

struct Corpus {
    std::vector<CorpusSample> samples;
    std::vector<std::string> vocabulary;
};

struct SynthOptions {
    int vocab_size = 20;
    int samples = 200;
    int frames_per_gloss = 10;
    int min_tokens = 2;
    int max_tokens = 5;
    double fps = 25.0;
    uint64_t seed = 0;
};

// Procedural gloss->pose corpus with exactly reconstructible ground truth:
// each token maps (via hashes of the token id) to a smooth motif of
// sinusoidal bone-direction trajectories at constant per-token bone lengths;
// samples are token sequences whose poses are motif concatenations with
// 3-frame linear cross-fades.
Corpus generate_synthetic_corpus(const SynthOptions& opt, const SkeletonTopology& topo,
                                 const std::string& topology_id);

// One motif frame (exposed so tests can check generated samples exactly).
Pose3D motif_frame(int token, int frame, int frames_per_gloss, const SkeletonTopology& topo, const Pose3D& rest);

// Rest pose driving motif generation: the preset rest pose when topology_id
// names a preset, otherwise a deterministic procedural fallback.
Pose3D synthesis_rest_pose(const SkeletonTopology& topo, const std::string& topology_id);

// Corpus directory layout: manifest.jsonl, vocab.txt, topology.json, poses/.
void write_corpus_dir(const Corpus& corpus, const SkeletonTopology& topo, const std::string& dir);

struct LoadedCorpus {
    Corpus corpus;
    SkeletonTopology topology;
    std::string topology_id;
};
LoadedCorpus load_corpus_dir(const std::string& dir);

}  // namespace signidd
