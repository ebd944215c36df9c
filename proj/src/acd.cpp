#include "signidd/acd.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "signidd/checkpoint.hpp"
#include "signidd/rng.hpp"

namespace signidd {

Tensor linear_apply(const LinearParam& p, const Tensor& x) {
    return add_rowvec(matmul(x, transpose(p.weight)), p.bias);
}

Tensor mha(const Tensor& q, const Tensor& k, const Tensor& v, const MhaParams& w, AttnTrace* trace) {
    const int d_out = w.wq.weight.shape()[0];
    if (d_out % w.heads != 0)
        throw std::invalid_argument("mha: width " + std::to_string(d_out) + " not divisible by " +
                                    std::to_string(w.heads) + " heads");
    if (k.rows() != v.rows()) throw std::invalid_argument("mha: key/value row mismatch");
    const int dk = d_out / w.heads;
    const Tensor qp = linear_apply(w.wq, q);
    const Tensor kp = linear_apply(w.wk, k);
    const Tensor vp = linear_apply(w.wv, v);
    std::vector<Tensor> heads;
    heads.reserve(static_cast<size_t>(w.heads));
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    for (int h = 0; h < w.heads; ++h) {
        const Tensor qh = slice_cols(qp, h * dk, (h + 1) * dk);
        const Tensor kh = slice_cols(kp, h * dk, (h + 1) * dk);
        const Tensor vh = slice_cols(vp, h * dk, (h + 1) * dk);
        const Tensor attn = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dk));
        if (trace) trace->weights.push_back(attn);
        heads.push_back(matmul(attn, vh));
    }
    return linear_apply(w.wo, concat_cols(heads));
}

std::vector<double> sinusoidal_row(int pos, int width) {
    std::vector<double> row(static_cast<size_t>(width));
    for (int i = 0; i < width; i += 2) {
        const double rate = std::pow(10000.0, -static_cast<double>(i) / width);
        row[static_cast<size_t>(i)] = std::sin(pos * rate);
        if (i + 1 < width) row[static_cast<size_t>(i + 1)] = std::cos(pos * rate);
    }
    return row;
}

Tensor sinusoidal_rows(int count, int width) {
    std::vector<double> v;
    v.reserve(static_cast<size_t>(count) * width);
    for (int p = 0; p < count; ++p) {
        const auto row = sinusoidal_row(p, width);
        v.insert(v.end(), row.begin(), row.end());
    }
    return Tensor::from({count, width}, std::move(v));
}

namespace {

LinearParam init_linear(int out, int in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(static_cast<size_t>(out) * in);
    for (double& x : w) x = (2.0 * rng.uniform() - 1.0) * bound;
    LinearParam p;
    p.weight = Tensor::from({out, in}, std::move(w), true);
    p.bias = Tensor::zeros({out}, true);
    return p;
}

NormParam init_norm(int width, Rng&) {
    NormParam n;
    n.gain = Tensor::from({width}, std::vector<double>(static_cast<size_t>(width), 1.0), true);
    n.shift = Tensor::zeros({width}, true);
    return n;
}

MhaParams init_mha(int width, int heads, Rng& rng) {
    MhaParams m;
    m.wq = init_linear(width, width, rng);
    m.wk = init_linear(width, width, rng);
    m.wv = init_linear(width, width, rng);
    m.wo = init_linear(width, width, rng);
    m.heads = heads;
    return m;
}

AttnBlock init_block(int width, int heads, int ff_width, Rng& rng) {
    AttnBlock b;
    b.norm_q = init_norm(width, rng);
    b.mha = init_mha(width, heads, rng);
    b.norm_ff = init_norm(width, rng);
    b.ff1 = init_linear(ff_width, width, rng);
    b.ff2 = init_linear(width, ff_width, rng);
    return b;
}

}  // namespace

AcdModel AcdModel::init(const AcdConfig& cfg, SkeletonTopology topo, std::string topology_id,
                        std::vector<std::string> vocabulary, int schedule_T, uint64_t seed) {
    validate_topology(topo);
    if (vocabulary.empty()) throw std::invalid_argument("acd: empty vocabulary");
    if (cfg.d_model % cfg.heads != 0) throw std::invalid_argument("acd: d_model not divisible by heads");
    AcdModel m;
    m.config = cfg;
    m.topology = std::move(topo);
    m.topology_id = std::move(topology_id);
    m.vocabulary = std::move(vocabulary);
    m.schedule_T = schedule_T;
    m.duration_table.assign(m.vocabulary.size(), 0.0);

    Rng rng(seed);
    const int d = cfg.d_model;
    const int da = cfg.attr_width();
    const int ff = cfg.ff_width();
    const int j7 = m.topology.joint_count() * 7;

    const double embed_bound = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> embed(static_cast<size_t>(m.vocabulary.size()) * d);
    for (double& x : embed) x = (2.0 * rng.uniform() - 1.0) * embed_bound;
    m.gloss.embed = Tensor::from({static_cast<int>(m.vocabulary.size()), d}, std::move(embed), true);
    for (int l = 0; l < cfg.gloss_layers; ++l) m.gloss.blocks.push_back(init_block(d, cfg.heads, ff, rng));
    m.gloss.final_norm = init_norm(d, rng);

    m.se = init_linear(d, j7, rng);
    m.cond = init_block(d, cfg.heads, ff, rng);
    m.attr_sep = init_linear(j7, d, rng);
    m.coord_lift = init_linear(da, 3, rng);
    m.coord = init_block(da, cfg.heads, ff, rng);
    m.attr_lift = init_linear(da, 4, rng);
    m.control = init_block(da, cfg.heads, ff, rng);
    m.head_norm = init_norm(da, rng);
    m.head1 = init_linear(cfg.mlp_width(), da, rng);
    m.head2 = init_linear(3, cfg.mlp_width(), rng);

    m.register_params();
    return m;
}

namespace {

void push_linear(std::vector<Tensor>& params, std::vector<std::string>& names, const std::string& prefix,
                 const LinearParam& p) {
    params.push_back(p.weight);
    names.push_back(prefix + ".weight");
    params.push_back(p.bias);
    names.push_back(prefix + ".bias");
}

void push_norm(std::vector<Tensor>& params, std::vector<std::string>& names, const std::string& prefix,
               const NormParam& n) {
    params.push_back(n.gain);
    names.push_back(prefix + ".gain");
    params.push_back(n.shift);
    names.push_back(prefix + ".shift");
}

void push_block(std::vector<Tensor>& params, std::vector<std::string>& names, const std::string& prefix,
                const AttnBlock& b) {
    push_norm(params, names, prefix + ".norm_q", b.norm_q);
    push_linear(params, names, prefix + ".wq", b.mha.wq);
    push_linear(params, names, prefix + ".wk", b.mha.wk);
    push_linear(params, names, prefix + ".wv", b.mha.wv);
    push_linear(params, names, prefix + ".wo", b.mha.wo);
    push_norm(params, names, prefix + ".norm_ff", b.norm_ff);
    push_linear(params, names, prefix + ".ff1", b.ff1);
    push_linear(params, names, prefix + ".ff2", b.ff2);
}

}  // namespace

void AcdModel::register_params() {
    params_.clear();
    param_names_.clear();
    params_.push_back(gloss.embed);
    param_names_.push_back("gloss.embed");
    for (size_t l = 0; l < gloss.blocks.size(); ++l)
        push_block(params_, param_names_, "gloss.block" + std::to_string(l), gloss.blocks[l]);
    push_norm(params_, param_names_, "gloss.final_norm", gloss.final_norm);
    push_linear(params_, param_names_, "se", se);
    push_block(params_, param_names_, "cond", cond);
    push_linear(params_, param_names_, "attr_sep", attr_sep);
    push_linear(params_, param_names_, "coord_lift", coord_lift);
    push_block(params_, param_names_, "coord", coord);
    push_linear(params_, param_names_, "attr_lift", attr_lift);
    push_block(params_, param_names_, "control", control);
    push_norm(params_, param_names_, "head_norm", head_norm);
    push_linear(params_, param_names_, "head1", head1);
    push_linear(params_, param_names_, "head2", head2);
}

long AcdModel::parameter_count() const {
    long n = 0;
    for (const Tensor& p : params_) n += p.size();
    return n;
}

Tensor AcdModel::attn_block(const AttnBlock& block, const Tensor& x, const Tensor& memory,
                            bool self_attention) const {
    const Tensor q_in = layer_norm(x, block.norm_q.gain, block.norm_q.shift);
    const Tensor kv = self_attention ? q_in : memory;
    const Tensor attn = mha(q_in, kv, kv, block.mha, trace);
    Tensor out = config.use_residual ? add(x, attn) : attn;
    if (config.use_ffn) {
        const Tensor f_in = layer_norm(out, block.norm_ff.gain, block.norm_ff.shift);
        const Tensor f = linear_apply(block.ff2, silu(linear_apply(block.ff1, f_in)));
        out = config.use_residual ? add(out, f) : f;
    }
    return out;
}

GlossEmbedding AcdModel::encode_gloss(const GlossSequence& tokens) const {
    if (tokens.tokens.empty()) throw std::invalid_argument("encode_gloss: empty gloss sequence");
    for (int t : tokens.tokens) {
        if (t < 0 || t >= vocab_size())
            throw std::out_of_range("encode_gloss: token index " + std::to_string(t) + " outside vocabulary of " +
                                    std::to_string(vocab_size()));
    }
    const int n = static_cast<int>(tokens.tokens.size());
    Tensor x = add(embedding_rows(gloss.embed, tokens.tokens), sinusoidal_rows(n, config.d_model));
    for (const AttnBlock& b : gloss.blocks) x = attn_block(b, x, x, true);
    x = layer_norm(x, gloss.final_norm.gain, gloss.final_norm.shift);
    return GlossEmbedding{x};
}

Tensor AcdModel::self_embed(const Tensor& fused, int t) const {
    const int j7 = topology.joint_count() * 7;
    if (fused.cols() != j7)
        throw std::invalid_argument("self_embed: fused width " + std::to_string(fused.cols()) + ", expected " +
                                    std::to_string(j7));
    const int s = fused.rows();
    Tensor x = linear_apply(se, fused);
    x = add(x, sinusoidal_rows(s, config.d_model));
    const Tensor te = Tensor::from({config.d_model}, sinusoidal_row(t, config.d_model));
    return add_rowvec(x, te);
}

Tensor AcdModel::condition_integrate(const Tensor& p_hat, const GlossEmbedding& g) const {
    if (p_hat.cols() != config.d_model || g.matrix.cols() != config.d_model)
        throw std::invalid_argument("condition_integrate: width mismatch");
    return attn_block(cond, p_hat, g.matrix, false);
}

std::pair<Tensor, Tensor> AcdModel::attribute_separate(const Tensor& d) const {
    const int j = topology.joint_count();
    const Tensor proj = linear_apply(attr_sep, d);  // S x (J*7)
    std::vector<Tensor> coords, attrs;
    coords.reserve(static_cast<size_t>(j));
    attrs.reserve(static_cast<size_t>(j));
    for (int k = 0; k < j; ++k) {
        coords.push_back(slice_cols(proj, k * 7, k * 7 + 3));
        attrs.push_back(slice_cols(proj, k * 7 + 3, k * 7 + 7));
    }
    return {concat_cols(coords), concat_cols(attrs)};
}

Tensor AcdModel::coordinate_attention(const Tensor& d_c) const {
    const int j = topology.joint_count();
    if (d_c.cols() != j * 3) throw std::invalid_argument("coordinate_attention: width must be J*3");
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(j));
    for (int k = 0; k < j; ++k) {
        const Tensor lifted = linear_apply(coord_lift, slice_cols(d_c, k * 3, (k + 1) * 3));
        out.push_back(attn_block(coord, lifted, lifted, true));
    }
    return concat_cols(out);
}

Tensor AcdModel::attribute_control(const Tensor& d_c_star, const Tensor& d_a) const {
    const int j = topology.joint_count();
    const int da = config.attr_width();
    if (d_c_star.cols() != j * da) throw std::invalid_argument("attribute_control: coordinate-stream width mismatch");
    if (d_a.cols() != j * 4) throw std::invalid_argument("attribute_control: attribute width must be J*4");
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(j));
    for (int k = 0; k < j; ++k) {
        const Tensor q = slice_cols(d_c_star, k * da, (k + 1) * da);
        const Tensor kv = linear_apply(attr_lift, slice_cols(d_a, k * 4, (k + 1) * 4));
        out.push_back(attn_block(control, q, kv, false));
    }
    return concat_cols(out);
}

Tensor AcdModel::project_pose(const Tensor& features) const {
    const int j = topology.joint_count();
    const int da = config.attr_width();
    if (features.cols() != j * da) throw std::invalid_argument("project_pose: feature width mismatch");
    std::vector<Tensor> out;
    out.reserve(static_cast<size_t>(j));
    for (int k = 0; k < j; ++k) {
        const Tensor f = slice_cols(features, k * da, (k + 1) * da);
        const Tensor n = layer_norm(f, head_norm.gain, head_norm.shift);
        out.push_back(linear_apply(head2, silu(linear_apply(head1, n))));
    }
    return concat_cols(out);
}

namespace {

template <typename F>
Tensor stage(const char* name, F&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("denoise/") + name + ": " + e.what());
    }
}

}  // namespace

Tensor AcdModel::denoise(const Tensor& fused, const GlossEmbedding& g, int t) const {
    const Tensor p_hat = stage("self_embed", [&] { return self_embed(fused, t); });
    const Tensor d = stage("condition_integrate", [&] { return condition_integrate(p_hat, g); });
    std::pair<Tensor, Tensor> sep;
    try {
        sep = attribute_separate(d);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("denoise/attribute_separate: ") + e.what());
    }
    const Tensor d_c_star = stage("coordinate_attention", [&] { return coordinate_attention(sep.first); });
    const Tensor d_p = stage("attribute_control", [&] { return attribute_control(d_c_star, sep.second); });
    return stage("project_pose", [&] { return project_pose(d_p); });
}

Tensor AcdModel::denoise(const std::vector<Fused7D>& frames, const GlossEmbedding& g, int t) const {
    if (frames.empty()) throw std::invalid_argument("denoise: empty frame sequence");
    const int j = topology.joint_count();
    std::vector<double> v;
    v.reserve(frames.size() * static_cast<size_t>(j) * 7);
    for (const Fused7D& f : frames) {
        if (f.joint_count() != j) throw std::invalid_argument("denoise: fused frame joint count mismatch");
        for (const auto& row : f.rows) v.insert(v.end(), row.begin(), row.end());
    }
    const Tensor fused = Tensor::from({static_cast<int>(frames.size()), j * 7}, std::move(v));
    return denoise(fused, g, t);
}

int AcdModel::vocab_index(const std::string& token) const {
    for (size_t i = 0; i < vocabulary.size(); ++i)
        if (vocabulary[i] == token) return static_cast<int>(i);
    return -1;
}

void AcdModel::save(const std::string& path) const {
    nlohmann::json meta;
    meta["format"] = "sign-idd-acd";
    meta["topology_id"] = topology_id;
    meta["topology"] = {{"joints", topology.joint_names}, {"parents", topology.parents}, {"root", topology.root}};
    meta["vocabulary"] = vocabulary;
    meta["config"] = {{"d_model", config.d_model},         {"heads", config.heads},
                      {"gloss_layers", config.gloss_layers}, {"d_attr", config.d_attr},
                      {"ff_hidden", config.ff_hidden},     {"mlp_hidden", config.mlp_hidden},
                      {"use_residual", config.use_residual}, {"use_ffn", config.use_ffn}};
    meta["schedule_T"] = schedule_T;
    meta["duration_table"] = duration_table;
    meta["fps"] = fps;
    std::vector<NamedArray> arrays;
    arrays.reserve(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
        NamedArray a;
        a.name = param_names_[i];
        a.shape = params_[i].shape();
        a.values.assign(params_[i].values().begin(), params_[i].values().end());
        arrays.push_back(std::move(a));
    }
    write_checkpoint(path, meta.dump(), arrays);
}

AcdModel AcdModel::load(const std::string& path) {
    const CheckpointData data = read_checkpoint(path);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(data.meta_json);
    } catch (const std::exception& e) {
        throw std::runtime_error("checkpoint: bad metadata JSON: " + std::string(e.what()));
    }
    AcdConfig cfg;
    const auto& jc = meta.at("config");
    cfg.d_model = jc.at("d_model").get<int>();
    cfg.heads = jc.at("heads").get<int>();
    cfg.gloss_layers = jc.at("gloss_layers").get<int>();
    cfg.d_attr = jc.at("d_attr").get<int>();
    cfg.ff_hidden = jc.at("ff_hidden").get<int>();
    cfg.mlp_hidden = jc.at("mlp_hidden").get<int>();
    cfg.use_residual = jc.at("use_residual").get<bool>();
    cfg.use_ffn = jc.at("use_ffn").get<bool>();
    SkeletonTopology topo;
    topo.joint_names = meta.at("topology").at("joints").get<std::vector<std::string>>();
    topo.parents = meta.at("topology").at("parents").get<std::vector<int>>();
    topo.root = meta.at("topology").at("root").get<int>();
    AcdModel m = init(cfg, std::move(topo), meta.at("topology_id").get<std::string>(),
                      meta.at("vocabulary").get<std::vector<std::string>>(), meta.at("schedule_T").get<int>(), 0);
    m.duration_table = meta.at("duration_table").get<std::vector<double>>();
    if (meta.contains("fps")) m.fps = meta.at("fps").get<double>();
    if (data.arrays.size() != m.params_.size())
        throw std::runtime_error("checkpoint: expected " + std::to_string(m.params_.size()) + " arrays, found " +
                                 std::to_string(data.arrays.size()));
    for (size_t i = 0; i < data.arrays.size(); ++i) {
        const NamedArray& a = data.arrays[i];
        if (a.name != m.param_names_[i]) throw std::runtime_error("checkpoint: unexpected array " + a.name);
        Tensor p = m.params_[i];
        if (a.shape != p.shape()) throw std::runtime_error("checkpoint: shape mismatch for " + a.name);
        std::copy(a.values.begin(), a.values.end(), p.data());
    }
    return m;
}

}  // namespace signidd
