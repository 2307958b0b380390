#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vlmd {

using TokenId = std::int32_t;
using Tokens = std::vector<TokenId>;

inline constexpr std::string_view kMaskSymbol = "[mask]";
inline constexpr std::string_view kExpandSymbol = "[expand]";
inline constexpr std::string_view kDeleteSymbol = "[delete]";

/// Symbol table: regular ids occupy [0, V), the three sentinel states follow
/// in the fixed order [mask], [expand], [delete].
class Vocabulary {
public:
    static constexpr int kNumSentinels = 3;

    Vocabulary() = default;

    /// Throws std::invalid_argument on an empty list, duplicates, or a symbol
    /// that collides with a sentinel name or contains whitespace.
    static Vocabulary build(std::vector<std::string> regular_symbols);

    int regular_size() const { return static_cast<int>(symbols_.size()) - kNumSentinels; }
    int size() const { return static_cast<int>(symbols_.size()); }

    TokenId mask() const { return regular_size(); }
    TokenId expand() const { return regular_size() + 1; }
    TokenId del() const { return regular_size() + 2; }

    bool is_regular(TokenId id) const { return id >= 0 && id < regular_size(); }
    bool is_sentinel(TokenId id) const { return id >= regular_size() && id < size(); }
    bool contains(TokenId id) const { return id >= 0 && id < size(); }

    const std::string& symbol(TokenId id) const;
    TokenId id(std::string_view symbol) const;
    bool has_symbol(std::string_view symbol) const;

    std::span<const std::string> regular_symbols() const {
        return std::span<const std::string>(symbols_).first(static_cast<std::size_t>(regular_size()));
    }

    /// Space-separated symbols to ids.
    Tokens encode(std::string_view line) const;
    Tokens encode(std::span<const std::string> symbols) const;
    std::string decode(std::span<const TokenId> ids) const;
    std::vector<std::string> to_symbols(std::span<const TokenId> ids) const;

    /// One regular symbol per line; sentinels are implied.
    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

    bool operator==(const Vocabulary& other) const { return symbols_ == other.symbols_; }

private:
    std::vector<std::string> symbols_;
    std::unordered_map<std::string, TokenId> index_;
};

inline Vocabulary build_vocabulary(std::vector<std::string> regular_symbols) {
    return Vocabulary::build(std::move(regular_symbols));
}

std::vector<std::string> split_symbols(std::string_view line);

}  // namespace vlmd
