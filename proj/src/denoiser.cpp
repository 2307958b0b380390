#include "vlmd/denoiser.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace vlmd {

ProbRows Denoiser::predict(std::span<const TokenId> tokens) const {
    if (tokens.size() > max_length()) {
        throw std::length_error("denoiser: input length " + std::to_string(tokens.size()) + " exceeds maximum " +
                                std::to_string(max_length()));
    }
    return predict_rows(tokens);
}

ScriptedDenoiser::ScriptedDenoiser(const Vocabulary& vocab, std::vector<Step> script, std::size_t max_length)
    : vocab_size_(vocab.size()), regular_size_(vocab.regular_size()), script_(std::move(script)),
      max_length_(max_length) {
    for (const auto& step : script_) {
        for (const auto& [pos, tok] : step) {
            if (!vocab.contains(tok) || tok == vocab.mask()) {
                throw std::invalid_argument("scripted denoiser: invalid scripted token");
            }
        }
    }
}

ProbRows ScriptedDenoiser::predict_rows(std::span<const TokenId> tokens) const {
    ProbRows rows(tokens.size(), static_cast<std::size_t>(vocab_size_));
    const double u = 1.0 / regular_size_;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        for (int k = 0; k < regular_size_; ++k) {
            rows.at(i, static_cast<std::size_t>(k)) = u;
        }
    }
    if (calls_ < script_.size()) {
        for (const auto& [pos, tok] : script_[calls_]) {
            if (pos >= tokens.size()) {
                continue;
            }
            auto r = rows.row(pos);
            std::fill(r.begin(), r.end(), 0.0);
            r[static_cast<std::size_t>(tok)] = 1.0;
        }
    }
    ++calls_;
    return rows;
}

}  // namespace vlmd
