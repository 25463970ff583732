#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace edna {

using Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 (FIPS 180-2). Used for config hashes, checkpoint
/// integrity, and component source digests.
class Sha256 {
public:
  Sha256();

  void update(const void* data, std::size_t len);
  void update(std::string_view text) { update(text.data(), text.size()); }
  Digest finalize();

private:
  void process_block(const std::uint8_t* block);

  std::array<std::uint32_t, 8> state_;
  std::array<std::uint8_t, 64> buffer_;
  std::uint64_t total_len_ = 0;
  std::size_t buffer_len_ = 0;
};

Digest sha256(const void* data, std::size_t len);
Digest sha256(std::string_view text);
Digest sha256(const std::vector<std::uint8_t>& bytes);

std::string to_hex(const Digest& d);
Digest digest_from_hex(const std::string& hex);

} // namespace edna
