#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace vrh {

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

// Incremental hasher for multi-part content.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> bytes);
  void update(std::string_view text);
  std::string hex_digest();

 private:
  void* ctx_;
};

}  // namespace vrh
