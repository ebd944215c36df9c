#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "signidd/disentangle.hpp"
#include "signidd/skeleton.hpp"
#include "signidd/tensor.hpp"

namespace signidd {

// Conditioning input: vocabulary indices, length N >= 1.
struct GlossSequence {
    std::vector<int> tokens;
};

// Gloss-encoder output, N x d_model.
struct GlossEmbedding {
    Tensor matrix;
};

struct AcdConfig {
    int d_model = 64;       // desk-scale default; the reference setup uses 512
    int heads = 4;
    int gloss_layers = 2;
    int d_attr = 0;         // per-joint block width; 0 -> d_model
    int ff_hidden = 0;      // feed-forward width; 0 -> 2*d_model
    int mlp_hidden = 0;     // output-head hidden width; 0 -> d_model
    bool use_residual = true;
    bool use_ffn = true;

    int attr_width() const { return d_attr > 0 ? d_attr : d_model; }
    int ff_width() const { return ff_hidden > 0 ? ff_hidden : 2 * d_model; }
    int mlp_width() const { return mlp_hidden > 0 ? mlp_hidden : d_model; }
};

struct LinearParam {
    Tensor weight;  // out x in
    Tensor bias;    // out
};

struct NormParam {
    Tensor gain;
    Tensor shift;
};

struct MhaParams {
    LinearParam wq, wk, wv, wo;
    int heads = 1;
};

// Pre-norm attention block with optional residual and feed-forward sublayer.
struct AttnBlock {
    NormParam norm_q;
    MhaParams mha;
    NormParam norm_ff;
    LinearParam ff1, ff2;
};

// Collects the softmax attention matrices of every MHA evaluated while a
// trace is installed (rows sum to 1).
struct AttnTrace {
    std::vector<Tensor> weights;
};

// x (rows x in) -> x * W^T + b.
Tensor linear_apply(const LinearParam& p, const Tensor& x);

// Multi-head attention exactly in the softmax(QK^T/sqrt(d_k))V form: fused
// per-head projections sliced column-wise, heads concatenated, then the
// output projection.
Tensor mha(const Tensor& q, const Tensor& k, const Tensor& v, const MhaParams& w, AttnTrace* trace = nullptr);

// Sinusoidal encodings (non-learnable).
Tensor sinusoidal_rows(int count, int width);          // rows 0..count-1
std::vector<double> sinusoidal_row(int pos, int width);

class AcdModel {
public:
    AcdModel() = default;

    static AcdModel init(const AcdConfig& cfg, SkeletonTopology topo, std::string topology_id,
                         std::vector<std::string> vocabulary, int schedule_T, uint64_t seed);

    // Gloss token embedding + positional encoding + transformer blocks.
    GlossEmbedding encode_gloss(const GlossSequence& tokens) const;

    // fused is S x (J*7); adds frame positional and timestep encodings.
    Tensor self_embed(const Tensor& fused, int t) const;

    // Cross-attention, pose frames as queries, gloss memory as key/value.
    Tensor condition_integrate(const Tensor& p_hat, const GlossEmbedding& g) const;

    // d (S x d_model) -> coordinate features S x (J*3) and attribute
    // features S x (J*4) via the 7-wide reprojection.
    std::pair<Tensor, Tensor> attribute_separate(const Tensor& d) const;

    // Temporal self-attention over each joint's lifted coordinate stream.
    Tensor coordinate_attention(const Tensor& d_c) const;

    // Cross-attention injecting bone attributes into coordinate features.
    Tensor attribute_control(const Tensor& d_c_star, const Tensor& d_a) const;

    // LayerNorm + per-joint 2-layer MLP down to 3 coordinates; S x (J*3).
    Tensor project_pose(const Tensor& features) const;

    // Full denoiser: returns the 3-D pose hypothesis, S x (J*3).
    Tensor denoise(const Tensor& fused, const GlossEmbedding& g, int t) const;
    Tensor denoise(const std::vector<Fused7D>& frames, const GlossEmbedding& g, int t) const;

    int vocab_index(const std::string& token) const;  // -1 when unknown
    int vocab_size() const { return static_cast<int>(vocabulary.size()); }

    std::span<const Tensor> parameters() const { return params_; }
    const std::vector<std::string>& parameter_names() const { return param_names_; }
    long parameter_count() const;

    void save(const std::string& path) const;
    static AcdModel load(const std::string& path);

    // metadata (stored in the checkpoint)
    AcdConfig config;
    SkeletonTopology topology;
    std::string topology_id;
    std::vector<std::string> vocabulary;
    int schedule_T = 1000;
    std::vector<double> duration_table;  // mean frames per vocab token
    double fps = 25.0;

    // Installed by tests to observe attention weights.
    mutable AttnTrace* trace = nullptr;

    // Learnable structure; public so tests can probe individual stages.
    struct GlossEncoderParams {
        Tensor embed;  // V x d_model
        std::vector<AttnBlock> blocks;
        NormParam final_norm;
    };
    GlossEncoderParams gloss;
    LinearParam se;          // (J*7) -> d_model
    AttnBlock cond;          // condition integration
    LinearParam attr_sep;    // d_model -> J*7
    LinearParam coord_lift;  // 3 -> d_attr
    AttnBlock coord;         // coordinate attention
    LinearParam attr_lift;   // 4 -> d_attr
    AttnBlock control;       // attribute control
    NormParam head_norm;
    LinearParam head1, head2;  // d_attr -> mlp_hidden -> 3

private:
    Tensor attn_block(const AttnBlock& block, const Tensor& x, const Tensor& memory, bool self_attention) const;
    void register_params();

    std::vector<Tensor> params_;
    std::vector<std::string> param_names_;
};

}  // namespace signidd
