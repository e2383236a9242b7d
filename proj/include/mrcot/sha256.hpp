#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace mrcot::util {

/// Incremental SHA-256. Used for artifact digests, determinism checks and
/// request fingerprints, so the output must be stable across platforms.
class Sha256 {
public:
    Sha256();

    void update(const void* data, std::size_t len);
    void update(std::string_view s) { update(s.data(), s.size()); }

    /// Finalizes and returns the 32-byte digest. The object must not be
    /// updated afterwards.
    std::array<std::uint8_t, 32> digest();

    /// Finalizes and returns the digest as lowercase hex.
    std::string hex_digest();

private:
    void process_block(const std::uint8_t* block);

    std::uint64_t bit_len_ = 0;
    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buffer_{};
    std::size_t buffer_len_ = 0;
    bool finalized_ = false;
};

std::string sha256_hex(std::string_view data);

} // namespace mrcot::util
