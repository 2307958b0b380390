#include "vlmd/vocab.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace vlmd {

std::vector<std::string> split_symbols(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') {
            ++j;
        }
        if (j > i) {
            out.emplace_back(line.substr(i, j - i));
        }
        i = j;
    }
    return out;
}

Vocabulary Vocabulary::build(std::vector<std::string> regular_symbols) {
    if (regular_symbols.empty()) {
        throw std::invalid_argument("vocabulary: symbol list is empty");
    }
    Vocabulary v;
    v.symbols_ = std::move(regular_symbols);
    for (const auto s : {kMaskSymbol, kExpandSymbol, kDeleteSymbol}) {
        v.symbols_.emplace_back(s);
    }
    for (std::size_t i = 0; i < v.symbols_.size(); ++i) {
        const auto& s = v.symbols_[i];
        if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
            throw std::invalid_argument("vocabulary: symbol '" + s + "' is empty or contains whitespace");
        }
        if (!v.index_.emplace(s, static_cast<TokenId>(i)).second) {
            throw std::invalid_argument("vocabulary: duplicate symbol '" + s + "'");
        }
    }
    return v;
}

const std::string& Vocabulary::symbol(TokenId id) const {
    if (!contains(id)) {
        throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return symbols_[static_cast<std::size_t>(id)];
}

TokenId Vocabulary::id(std::string_view symbol) const {
    auto it = index_.find(std::string(symbol));
    if (it == index_.end()) {
        throw std::out_of_range("vocabulary: unknown symbol '" + std::string(symbol) + "'");
    }
    return it->second;
}

bool Vocabulary::has_symbol(std::string_view symbol) const {
    return index_.contains(std::string(symbol));
}

Tokens Vocabulary::encode(std::string_view line) const {
    const auto parts = split_symbols(line);
    return encode(parts);
}

Tokens Vocabulary::encode(std::span<const std::string> symbols) const {
    Tokens out;
    out.reserve(symbols.size());
    for (const auto& s : symbols) {
        out.push_back(id(s));
    }
    return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) {
            out += ' ';
        }
        out += symbol(ids[i]);
    }
    return out;
}

std::vector<std::string> Vocabulary::to_symbols(std::span<const TokenId> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto id : ids) {
        out.push_back(symbol(id));
    }
    return out;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) {
        throw std::runtime_error("vocabulary: cannot write " + path.string());
    }
    for (const auto& s : regular_symbols()) {
        os << s << '\n';
    }
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw std::runtime_error("vocabulary: cannot read " + path.string());
    }
    std::vector<std::string> symbols;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            symbols.push_back(line);
        }
    }
    return build(std::move(symbols));
}

}  // namespace vlmd
