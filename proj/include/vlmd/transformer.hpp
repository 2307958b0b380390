#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vlmd/denoiser.hpp"
#include "vlmd/rng.hpp"

namespace vlmd {

struct ModelConfig {
    int vocab_size = 0;
    int d_model = 128;
    int n_heads = 4;
    int n_layers = 4;
    int d_ff = 512;
    int max_len = 256;

    bool operator==(const ModelConfig&) const = default;
    /// Throws std::invalid_argument with the offending field name.
    void validate() const;
};

struct TensorInfo {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;

    std::size_t size() const { return rows * cols; }
};

/// Declared order of every parameter tensor inside the flat parameter vector.
std::vector<TensorInfo> parameter_layout(const ModelConfig& cfg);

/// Bidirectional pre-LayerNorm transformer encoder over token ids with
/// learned absolute positions and an untied output projection.
///
/// All parameters live in one flat vector laid out by parameter_layout(), so
/// the optimizer, checkpoints and gradient checks can treat them uniformly.
/// The scalar type is a template parameter; float is used for training and
/// inference, double for finite-difference checks.
template <typename S>
class Transformer {
public:
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using Col = Eigen::Matrix<S, Eigen::Dynamic, 1>;

    struct BlockCache {
        Mat x_in;
        Mat ln1_hat;
        Col ln1_rstd;
        Mat ln1_out;
        Mat qkv;
        std::vector<Mat> probs;  // per head, T x T
        Mat attn;
        Mat x_mid;
        Mat ln2_hat;
        Col ln2_rstd;
        Mat ln2_out;
        Mat h_pre;
        Mat h_act;
    };

    struct Cache {
        std::vector<TokenId> tokens;
        std::vector<BlockCache> blocks;
        Mat x_final;
        Mat lnf_hat;
        Col lnf_rstd;
        Mat lnf_out;
        Mat logits;  // T x V
    };

    explicit Transformer(ModelConfig cfg);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<TensorInfo>& layout() const { return layout_; }

    std::vector<S>& params() { return params_; }
    const std::vector<S>& params() const { return params_; }

    /// Small-normal weights, zero biases, unit LayerNorm gains.
    void init(Rng& rng, double stddev = 0.02);

    /// Fills cache (including cache.logits). Throws std::length_error on
    /// over-length input and std::out_of_range on an unknown id.
    void forward(std::span<const TokenId> tokens, Cache& cache) const;

    /// Accumulates d loss / d params into grads (same layout as params()).
    void backward(const Cache& cache, const Mat& dlogits, std::vector<S>& grads) const;

    template <typename T>
    Transformer<T> cast() const {
        Transformer<T> out(cfg_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            out.params()[i] = static_cast<T>(params_[i]);
        }
        return out;
    }

private:
    ModelConfig cfg_;
    std::vector<TensorInfo> layout_;
    std::vector<S> params_;
};

extern template class Transformer<float>;
extern template class Transformer<double>;

/// The trainable denoiser: float transformer behind the Denoiser contract.
class TinyTransformer : public Denoiser {
public:
    explicit TinyTransformer(ModelConfig cfg) : net_(cfg) {}
    explicit TinyTransformer(Transformer<float> net) : net_(std::move(net)) {}

    std::size_t max_length() const override { return static_cast<std::size_t>(net_.config().max_len); }
    std::size_t vocab_size() const override { return static_cast<std::size_t>(net_.config().vocab_size); }

    Transformer<float>& net() { return net_; }
    const Transformer<float>& net() const { return net_; }

protected:
    ProbRows predict_rows(std::span<const TokenId> tokens) const override;

private:
    Transformer<float> net_;
};

}  // namespace vlmd
