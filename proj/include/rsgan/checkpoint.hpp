#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rsgan/discriminator.hpp"
#include "rsgan/generator.hpp"

namespace rsgan {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian binary layout:
///   "RSGN" | u32 version | u32 m, n, d, h
///   f64 row-major: W_in (m*h), b_hidden (h), U_node (m*h), W_out (h*m), b_out (m), H (m*n), P (m*d), Q (n*d)
///   u32 line count, then per line: u32 byte length + UTF-8 "key=value"
/// A model without a generator is stored with h = 0 and omits b_out and H.
struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    GeneratorParams generator;  // empty when h = 0
    DiscriminatorParams discriminator;
    std::vector<std::pair<std::string, std::string>> config;

    bool has_generator() const { return generator.hidden() > 0; }
    /// Value of a config key, or `fallback`.
    std::string get(const std::string& key, const std::string& fallback = "") const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws IoError when unreadable, FormatError on bad magic, version
/// mismatch, truncation or trailing bytes.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rsgan
