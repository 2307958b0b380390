#include "vlmd/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace vlmd {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

// Tensor indices inside one block, in declared order.
enum BlockTensor {
    kLn1G,
    kLn1B,
    kWqkv,
    kBqkv,
    kWo,
    kBo,
    kLn2G,
    kLn2B,
    kW1,
    kB1,
    kW2,
    kB2,
    kBlockTensors
};

}  // namespace

void ModelConfig::validate() const {
    auto need = [](bool ok, const char* field, const char* what) {
        if (!ok) {
            throw std::invalid_argument(std::string("model.") + field + ": " + what);
        }
    };
    need(vocab_size > 0, "vocab_size", "must be positive");
    need(d_model > 0, "d_model", "must be positive");
    need(n_heads > 0 && d_model % n_heads == 0, "n_heads", "must divide d_model");
    need(n_layers >= 0, "n_layers", "must be non-negative");
    need(d_ff > 0, "d_ff", "must be positive");
    need(max_len > 0, "max_len", "must be positive");
}

std::vector<TensorInfo> parameter_layout(const ModelConfig& cfg) {
    const auto d = static_cast<std::size_t>(cfg.d_model);
    const auto v = static_cast<std::size_t>(cfg.vocab_size);
    const auto f = static_cast<std::size_t>(cfg.d_ff);
    std::vector<TensorInfo> out;
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t r, std::size_t c) {
        out.push_back({std::move(name), r, c, off});
        off += r * c;
    };
    add("tok_emb", v, d);
    add("pos_emb", static_cast<std::size_t>(cfg.max_len), d);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        add(p + "ln1_g", 1, d);
        add(p + "ln1_b", 1, d);
        add(p + "w_qkv", d, 3 * d);
        add(p + "b_qkv", 1, 3 * d);
        add(p + "w_o", d, d);
        add(p + "b_o", 1, d);
        add(p + "ln2_g", 1, d);
        add(p + "ln2_b", 1, d);
        add(p + "w_1", d, f);
        add(p + "b_1", 1, f);
        add(p + "w_2", f, d);
        add(p + "b_2", 1, d);
    }
    add("lnf_g", 1, d);
    add("lnf_b", 1, d);
    add("w_out", d, v);
    add("b_out", 1, v);
    return out;
}

template <typename S>
Transformer<S>::Transformer(ModelConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    layout_ = parameter_layout(cfg_);
    params_.assign(layout_.back().offset + layout_.back().size(), S(0));
}

template <typename S>
void Transformer<S>::init(Rng& rng, double stddev) {
    for (const auto& t : layout_) {
        const bool is_gain = t.name.ends_with("_g");
        const bool is_bias = t.rows == 1 && !is_gain;
        for (std::size_t i = 0; i < t.size(); ++i) {
            S value = S(0);
            if (is_gain) {
                value = S(1);
            } else if (!is_bias) {
                value = static_cast<S>(stddev * rng.normal());
            }
            params_[t.offset + i] = value;
        }
    }
}

namespace {

template <typename S, typename Ptr>
auto mat_view(Ptr base, const TensorInfo& t) {
    using Mat = typename Transformer<S>::Mat;
    if constexpr (std::is_const_v<std::remove_pointer_t<Ptr>>) {
        return Eigen::Map<const Mat>(base + t.offset, static_cast<Eigen::Index>(t.rows),
                                     static_cast<Eigen::Index>(t.cols));
    } else {
        return Eigen::Map<Mat>(base + t.offset, static_cast<Eigen::Index>(t.rows),
                               static_cast<Eigen::Index>(t.cols));
    }
}

template <typename S, typename Ptr>
auto row_view(Ptr base, const TensorInfo& t) {
    using Row = Eigen::Matrix<S, 1, Eigen::Dynamic>;
    if constexpr (std::is_const_v<std::remove_pointer_t<Ptr>>) {
        return Eigen::Map<const Row>(base + t.offset, static_cast<Eigen::Index>(t.size()));
    } else {
        return Eigen::Map<Row>(base + t.offset, static_cast<Eigen::Index>(t.size()));
    }
}

template <typename S, typename G, typename B>
void layer_norm(const typename Transformer<S>::Mat& x, const G& gain, const B& bias,
                typename Transformer<S>::Mat& hat, typename Transformer<S>::Col& rstd,
                typename Transformer<S>::Mat& out) {
    const auto rows = x.rows();
    const auto cols = x.cols();
    hat.resize(rows, cols);
    rstd.resize(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const S mean = x.row(i).mean();
        const S var = (x.row(i).array() - mean).square().mean();
        const S r = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
        rstd(i) = r;
        hat.row(i) = (x.row(i).array() - mean) * r;
    }
    out = (hat.array().rowwise() * gain.array()).rowwise() + bias.array();
}

// dx (returned) from dout; accumulates dgain and dbias.
template <typename S, typename G, typename DG, typename DB>
typename Transformer<S>::Mat layer_norm_backward(const typename Transformer<S>::Mat& dout,
                                                 const typename Transformer<S>::Mat& hat,
                                                 const typename Transformer<S>::Col& rstd, const G& gain, DG dgain,
                                                 DB dbias) {
    using Mat = typename Transformer<S>::Mat;
    dgain += (dout.array() * hat.array()).colwise().sum().matrix();
    dbias += dout.colwise().sum();
    Mat dhat = dout.array().rowwise() * gain.array();
    Mat dx(dout.rows(), dout.cols());
    for (Eigen::Index i = 0; i < dout.rows(); ++i) {
        const S m1 = dhat.row(i).mean();
        const S m2 = (dhat.row(i).array() * hat.row(i).array()).mean();
        dx.row(i) = rstd(i) * (dhat.row(i).array() - m1 - hat.row(i).array() * m2);
    }
    return dx;
}

template <typename S>
S gelu(S x) {
    const S u = static_cast<S>(kGeluC) * (x + static_cast<S>(kGeluA) * x * x * x);
    return S(0.5) * x * (S(1) + std::tanh(u));
}

template <typename S>
S gelu_grad(S x) {
    const S u = static_cast<S>(kGeluC) * (x + static_cast<S>(kGeluA) * x * x * x);
    const S th = std::tanh(u);
    const S du = static_cast<S>(kGeluC) * (S(1) + S(3) * static_cast<S>(kGeluA) * x * x);
    return S(0.5) * (S(1) + th) + S(0.5) * x * (S(1) - th * th) * du;
}

}  // namespace

template <typename S>
void Transformer<S>::forward(std::span<const TokenId> tokens, Cache& cache) const {
    const auto T = static_cast<Eigen::Index>(tokens.size());
    if (T > cfg_.max_len) {
        throw std::length_error("transformer: sequence length exceeds max_len");
    }
    const Eigen::Index d = cfg_.d_model;
    const Eigen::Index heads = cfg_.n_heads;
    const Eigen::Index dh = d / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    const S* p = params_.data();

    cache.tokens.assign(tokens.begin(), tokens.end());
    cache.blocks.resize(static_cast<std::size_t>(cfg_.n_layers));

    const auto tok_emb = mat_view<S>(p, layout_[0]);
    const auto pos_emb = mat_view<S>(p, layout_[1]);
    Mat x(T, d);
    for (Eigen::Index i = 0; i < T; ++i) {
        const TokenId id = tokens[static_cast<std::size_t>(i)];
        if (id < 0 || id >= cfg_.vocab_size) {
            throw std::out_of_range("transformer: token id outside the vocabulary");
        }
        x.row(i) = tok_emb.row(id) + pos_emb.row(i);
    }

    for (int l = 0; l < cfg_.n_layers; ++l) {
        const TensorInfo* t = &layout_[2 + static_cast<std::size_t>(l) * kBlockTensors];
        auto& bc = cache.blocks[static_cast<std::size_t>(l)];
        bc.x_in = std::move(x);
        layer_norm<S>(bc.x_in, row_view<S>(p, t[kLn1G]), row_view<S>(p, t[kLn1B]), bc.ln1_hat, bc.ln1_rstd,
                      bc.ln1_out);
        bc.qkv.noalias() = bc.ln1_out * mat_view<S>(p, t[kWqkv]);
        bc.qkv.rowwise() += row_view<S>(p, t[kBqkv]);

        bc.probs.resize(static_cast<std::size_t>(heads));
        bc.attn.resize(T, d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            auto& P = bc.probs[static_cast<std::size_t>(h)];
            P.noalias() = (bc.qkv.middleCols(h * dh, dh) * bc.qkv.middleCols(d + h * dh, dh).transpose()) * scale;
            for (Eigen::Index i = 0; i < T; ++i) {
                const S mx = P.row(i).maxCoeff();
                P.row(i) = (P.row(i).array() - mx).exp();
                P.row(i) /= P.row(i).sum();
            }
            bc.attn.middleCols(h * dh, dh).noalias() = P * bc.qkv.middleCols(2 * d + h * dh, dh);
        }
        bc.x_mid = bc.x_in;
        bc.x_mid.noalias() += bc.attn * mat_view<S>(p, t[kWo]);
        bc.x_mid.rowwise() += row_view<S>(p, t[kBo]);

        layer_norm<S>(bc.x_mid, row_view<S>(p, t[kLn2G]), row_view<S>(p, t[kLn2B]), bc.ln2_hat, bc.ln2_rstd,
                      bc.ln2_out);
        bc.h_pre.noalias() = bc.ln2_out * mat_view<S>(p, t[kW1]);
        bc.h_pre.rowwise() += row_view<S>(p, t[kB1]);
        bc.h_act = bc.h_pre.unaryExpr([](S v) { return gelu(v); });
        x = bc.x_mid;
        x.noalias() += bc.h_act * mat_view<S>(p, t[kW2]);
        x.rowwise() += row_view<S>(p, t[kB2]);
    }

    const std::size_t tail = 2 + static_cast<std::size_t>(cfg_.n_layers) * kBlockTensors;
    cache.x_final = std::move(x);
    layer_norm<S>(cache.x_final, row_view<S>(p, layout_[tail]), row_view<S>(p, layout_[tail + 1]), cache.lnf_hat,
                  cache.lnf_rstd, cache.lnf_out);
    cache.logits.noalias() = cache.lnf_out * mat_view<S>(p, layout_[tail + 2]);
    cache.logits.rowwise() += row_view<S>(p, layout_[tail + 3]);
}

template <typename S>
void Transformer<S>::backward(const Cache& cache, const Mat& dlogits, std::vector<S>& grads) const {
    if (grads.size() != params_.size()) {
        grads.assign(params_.size(), S(0));
    }
    const Eigen::Index T = static_cast<Eigen::Index>(cache.tokens.size());
    const Eigen::Index d = cfg_.d_model;
    const Eigen::Index heads = cfg_.n_heads;
    const Eigen::Index dh = d / heads;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    const S* p = params_.data();
    S* g = grads.data();

    const std::size_t tail = 2 + static_cast<std::size_t>(cfg_.n_layers) * kBlockTensors;
    mat_view<S>(g, layout_[tail + 2]).noalias() += cache.lnf_out.transpose() * dlogits;
    row_view<S>(g, layout_[tail + 3]) += dlogits.colwise().sum();
    Mat dlnf = dlogits * mat_view<S>(p, layout_[tail + 2]).transpose();
    Mat dx = layer_norm_backward<S>(dlnf, cache.lnf_hat, cache.lnf_rstd, row_view<S>(p, layout_[tail]),
                                    row_view<S>(g, layout_[tail]), row_view<S>(g, layout_[tail + 1]));

    Mat dqkv;
    Mat dP;
    Mat dS;
    for (int l = cfg_.n_layers - 1; l >= 0; --l) {
        const TensorInfo* t = &layout_[2 + static_cast<std::size_t>(l) * kBlockTensors];
        const auto& bc = cache.blocks[static_cast<std::size_t>(l)];

        // MLP: x_out = x_mid + gelu(ln2(x_mid) W1 + b1) W2 + b2
        mat_view<S>(g, t[kW2]).noalias() += bc.h_act.transpose() * dx;
        row_view<S>(g, t[kB2]) += dx.colwise().sum();
        Mat dh_pre = dx * mat_view<S>(p, t[kW2]).transpose();
        dh_pre.array() *= bc.h_pre.unaryExpr([](S v) { return gelu_grad(v); }).array();
        mat_view<S>(g, t[kW1]).noalias() += bc.ln2_out.transpose() * dh_pre;
        row_view<S>(g, t[kB1]) += dh_pre.colwise().sum();
        Mat dln2 = dh_pre * mat_view<S>(p, t[kW1]).transpose();
        Mat dx_mid = dx + layer_norm_backward<S>(dln2, bc.ln2_hat, bc.ln2_rstd, row_view<S>(p, t[kLn2G]),
                                                 row_view<S>(g, t[kLn2G]), row_view<S>(g, t[kLn2B]));

        // Attention: x_mid = x_in + attn W_o + b_o
        mat_view<S>(g, t[kWo]).noalias() += bc.attn.transpose() * dx_mid;
        row_view<S>(g, t[kBo]) += dx_mid.colwise().sum();
        Mat dattn = dx_mid * mat_view<S>(p, t[kWo]).transpose();
        dqkv.resize(T, 3 * d);
        for (Eigen::Index h = 0; h < heads; ++h) {
            const auto& P = bc.probs[static_cast<std::size_t>(h)];
            const auto dO = dattn.middleCols(h * dh, dh);
            dP.noalias() = dO * bc.qkv.middleCols(2 * d + h * dh, dh).transpose();
            dqkv.middleCols(2 * d + h * dh, dh).noalias() = P.transpose() * dO;
            dS.resize(T, T);
            for (Eigen::Index i = 0; i < T; ++i) {
                const S dot = (P.row(i).array() * dP.row(i).array()).sum();
                dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
            }
            dqkv.middleCols(h * dh, dh).noalias() = (dS * bc.qkv.middleCols(d + h * dh, dh)) * scale;
            dqkv.middleCols(d + h * dh, dh).noalias() = (dS.transpose() * bc.qkv.middleCols(h * dh, dh)) * scale;
        }
        mat_view<S>(g, t[kWqkv]).noalias() += bc.ln1_out.transpose() * dqkv;
        row_view<S>(g, t[kBqkv]) += dqkv.colwise().sum();
        Mat dln1 = dqkv * mat_view<S>(p, t[kWqkv]).transpose();
        dx = dx_mid + layer_norm_backward<S>(dln1, bc.ln1_hat, bc.ln1_rstd, row_view<S>(p, t[kLn1G]),
                                             row_view<S>(g, t[kLn1G]), row_view<S>(g, t[kLn1B]));
    }

    auto dtok = mat_view<S>(g, layout_[0]);
    auto dpos = mat_view<S>(g, layout_[1]);
    for (Eigen::Index i = 0; i < T; ++i) {
        dtok.row(cache.tokens[static_cast<std::size_t>(i)]) += dx.row(i);
        dpos.row(i) += dx.row(i);
    }
}

template class Transformer<float>;
template class Transformer<double>;

ProbRows TinyTransformer::predict_rows(std::span<const TokenId> tokens) const {
    Transformer<float>::Cache cache;
    net_.forward(tokens, cache);
    const auto& logits = cache.logits;
    ProbRows rows(tokens.size(), vocab_size());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = static_cast<double>(logits.row(i).maxCoeff());
        double z = 0.0;
        auto r = rows.row(static_cast<std::size_t>(i));
        for (Eigen::Index k = 0; k < logits.cols(); ++k) {
            const double e = std::exp(static_cast<double>(logits(i, k)) - mx);
            r[static_cast<std::size_t>(k)] = e;
            z += e;
        }
        for (auto& v : r) {
            v /= z;
        }
    }
    return rows;
}

}  // namespace vlmd
