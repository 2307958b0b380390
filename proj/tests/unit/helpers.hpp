#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vlmd/rng.hpp"
#include "vlmd/vocab.hpp"

namespace testing {

inline vlmd::Vocabulary letters(int n = 26) {
    std::vector<std::string> s;
    for (int i = 0; i < n; ++i) {
        s.emplace_back(1, static_cast<char>('a' + i));
    }
    return vlmd::build_vocabulary(s);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("vlmd_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
