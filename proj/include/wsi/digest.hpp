#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <string>
#include <string_view>

namespace wsi {

/// 256-bit SHA-256 content digest.
class Digest {
 public:
  using Bytes = std::array<std::uint8_t, 32>;

  Digest() = default;
  explicit Digest(const Bytes& bytes) : bytes_(bytes) {}

  static Digest of(std::string_view data);
  /// Digest of several parts, each length-prefixed so ("ab","c") != ("a","bc").
  static Digest of_parts(std::initializer_list<std::string_view> parts);

  const Bytes& bytes() const noexcept { return bytes_; }
  std::string hex() const;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;

 private:
  Bytes bytes_{};
};

/// Incremental hasher for large inputs (files, config + input digests).
class Hasher {
 public:
  Hasher();
  ~Hasher();
  Hasher(const Hasher&) = delete;
  Hasher& operator=(const Hasher&) = delete;

  Hasher& update(std::string_view data);
  /// Appends a length prefix then the data.
  Hasher& update_part(std::string_view data);
  Digest finish();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

/// Digest of a file's bytes; throws wsi::LoadError if unreadable.
Digest file_digest(const std::string& path);

}  // namespace wsi
