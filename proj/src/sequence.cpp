#include "vlmd/sequence.hpp"

#include <fstream>
#include <stdexcept>

namespace vlmd {

CleanSequence make_clean(Tokens tokens, const Vocabulary& vocab) {
    for (auto id : tokens) {
        if (!vocab.is_regular(id)) {
            throw std::invalid_argument("clean sequence: id " + std::to_string(id) + " is not a regular symbol");
        }
    }
    return CleanSequence{std::move(tokens)};
}

Tokens InfillExample::solution() const {
    Tokens out;
    out.reserve(prefix.size() + middle.size() + suffix.size());
    out.insert(out.end(), prefix.tokens.begin(), prefix.tokens.end());
    out.insert(out.end(), middle.tokens.begin(), middle.tokens.end());
    out.insert(out.end(), suffix.tokens.begin(), suffix.tokens.end());
    return out;
}

Tokens InfillExample::leading_context() const {
    Tokens out = instruction.tokens;
    out.insert(out.end(), prefix.tokens.begin(), prefix.tokens.end());
    return out;
}

std::vector<std::size_t> mask_positions(std::span<const TokenId> tokens, TokenId mask_id) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] == mask_id) {
            out.push_back(i);
        }
    }
    return out;
}

Prompt assemble_prompt(const InfillExample& example, std::size_t init_mask_len, const Vocabulary& vocab) {
    if (init_mask_len == 0) {
        throw std::invalid_argument("assemble_prompt: init_mask_len must be >= 1");
    }
    Prompt p;
    auto& toks = p.sequence.tokens;
    toks = example.leading_context();
    p.active.begin = toks.size();
    toks.insert(toks.end(), init_mask_len, vocab.mask());
    p.active.end = toks.size();
    toks.insert(toks.end(), example.suffix.tokens.begin(), example.suffix.tokens.end());
    p.sequence.masked = mask_positions(toks, vocab.mask());
    p.sequence.time = 1.0;
    return p;
}

void write_sequences(const std::filesystem::path& path, std::span<const Tokens> sequences, const Vocabulary& vocab) {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const auto& s : sequences) {
        os << vocab.decode(s) << '\n';
    }
}

std::vector<Tokens> read_sequences(const std::filesystem::path& path, const Vocabulary& vocab) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::vector<Tokens> out;
    std::string line;
    while (std::getline(is, line)) {
        out.push_back(vocab.encode(line));
    }
    return out;
}

}  // namespace vlmd
