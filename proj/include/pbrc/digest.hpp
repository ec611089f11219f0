#pragma once

#include <openssl/evp.h>

#include <stdexcept>
#include <string>
#include <string_view>

namespace pbrc {

inline std::string to_hex(const unsigned char* buf, std::size_t n) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(digits[buf[i] >> 4]);
    out.push_back(digits[buf[i] & 0x0f]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_Digest(data.data(), data.size(), out, &n, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failure");
  }
  return to_hex(out, n);
}

inline std::string hmac_sha256_hex(std::string_view key, std::string_view msg) {
  unsigned char out[EVP_MAX_MD_SIZE];
  std::size_t n = 0;
  if (EVP_Q_mac(nullptr, "HMAC", nullptr, "SHA256", nullptr,
                key.data(), key.size(),
                reinterpret_cast<const unsigned char*>(msg.data()), msg.size(),
                out, sizeof out, &n) == nullptr) {
    throw std::runtime_error("hmac-sha256: mac failure");
  }
  return to_hex(out, n);
}

// Sentinel hash used as the chain predecessor of the first audit record.
inline const std::string& zero_hash() {
  static const std::string z(64, '0');
  return z;
}

}  // namespace pbrc
