#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "vlmd/vocab.hpp"

namespace vlmd {

/// Row-major positions x vocabulary probability table.
class ProbRows {
public:
    ProbRows() = default;
    ProbRows(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    double& at(std::size_t i, std::size_t k) { return data_[i * cols_ + k]; }
    double at(std::size_t i, std::size_t k) const { return data_[i * cols_ + k]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// p_theta(. | z): one categorical row per input position, same length as the
/// input. Implementations never change the sequence length.
class Denoiser {
public:
    virtual ~Denoiser() = default;

    virtual std::size_t max_length() const = 0;
    virtual std::size_t vocab_size() const = 0;

    /// Throws std::length_error when the input exceeds max_length().
    ProbRows predict(std::span<const TokenId> tokens) const;

protected:
    virtual ProbRows predict_rows(std::span<const TokenId> tokens) const = 0;
};

/// Test oracle. Call k consumes script[k]: scripted positions get a point
/// mass on their token, every other row is uniform over the regular ids.
/// Calls past the end of the script are uniform everywhere.
class ScriptedDenoiser : public Denoiser {
public:
    using Step = std::map<std::size_t, TokenId>;

    ScriptedDenoiser(const Vocabulary& vocab, std::vector<Step> script, std::size_t max_length = 4096);

    std::size_t max_length() const override { return max_length_; }
    std::size_t vocab_size() const override { return static_cast<std::size_t>(vocab_size_); }
    std::size_t calls() const { return calls_; }

protected:
    ProbRows predict_rows(std::span<const TokenId> tokens) const override;

private:
    int vocab_size_;
    int regular_size_;
    std::vector<Step> script_;
    std::size_t max_length_;
    mutable std::size_t calls_ = 0;
};

}  // namespace vlmd
