#include "wsi/digest.hpp"

#include <fstream>

#include <fmt/format.h>
#include <openssl/evp.h>

#include "wsi/error.hpp"

namespace wsi {

struct Hasher::State {
  State() : ctx(EVP_MD_CTX_new()) {}
  ~State() { EVP_MD_CTX_free(ctx); }
  State(const State&) = delete;
  State& operator=(const State&) = delete;
  EVP_MD_CTX* ctx;
};

Hasher::Hasher() : state_(std::make_unique<State>()) {
  if (state_->ctx == nullptr || EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 init failed");
  }
}

Hasher::~Hasher() = default;

Hasher& Hasher::update(std::string_view data) {
  EVP_DigestUpdate(state_->ctx, data.data(), data.size());
  return *this;
}

Hasher& Hasher::update_part(std::string_view data) {
  std::uint64_t n = data.size();
  std::array<char, 8> prefix{};
  for (int i = 0; i < 8; ++i) prefix[static_cast<std::size_t>(i)] = static_cast<char>((n >> (8 * i)) & 0xff);
  update(std::string_view(prefix.data(), prefix.size()));
  return update(data);
}

Digest Hasher::finish() {
  Digest::Bytes out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(state_->ctx, out.data(), &len);
  EVP_DigestInit_ex(state_->ctx, EVP_sha256(), nullptr);
  return Digest(out);
}

Digest Digest::of(std::string_view data) { return Hasher().update(data).finish(); }

Digest Digest::of_parts(std::initializer_list<std::string_view> parts) {
  Hasher h;
  for (auto p : parts) h.update_part(p);
  return h.finish();
}

std::string Digest::hex() const {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : bytes_) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

Digest file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(fmt::format("cannot read {}", path));
  Hasher h;
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
  }
  return h.finish();
}

}  // namespace wsi
