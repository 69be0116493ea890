#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>

namespace testsupport {

inline std::filesystem::path golden_path(const std::string& name) {
    return std::filesystem::path(VIDEOMIND_GOLDEN_DIR) / name;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Byte comparison against a frozen file. VIDEOMIND_UPDATE_GOLDEN=1 rewrites
/// it; a missing file is a failure, never silently created.
inline void check_golden(const std::string& name, const std::string& actual) {
    const auto path = golden_path(name);
    if (const char* u = std::getenv("VIDEOMIND_UPDATE_GOLDEN"); u && std::string(u) == "1") {
        std::ofstream(path, std::ios::binary | std::ios::trunc) << actual;
        MESSAGE("rewrote golden " << name);
        return;
    }
    REQUIRE_MESSAGE(std::filesystem::exists(path), "missing golden file " << path.string());
    CHECK(read_text(path) == actual);
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("videomind-" + tag + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
