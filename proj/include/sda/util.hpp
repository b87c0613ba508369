#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace sda {

// Error categories map onto CLI exit codes (usage=1, data=2, training=3,
// service=4).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ServiceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a_bytes(const void* data, size_t n, uint64_t h = kFnvOffset) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a(const std::string& s, uint64_t h = kFnvOffset) {
  return fnv1a_bytes(s.data(), s.size(), h);
}

std::string hex64(uint64_t h);

// FNV-1a over a whole file; throws DataError if unreadable.
uint64_t hash_file(const std::filesystem::path& path);

std::string lowercase(const std::string& s);

// Splits on whitespace after isolating punctuation runs into their own
// tokens: "hello, world!" -> {"hello", ",", "world", "!"}.
std::vector<std::string> split_tokens(const std::string& text);

std::string join_tokens(const std::vector<std::string>& tokens,
                        const std::string& sep = " ");

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

// Derives an independent seed for a named substream of a master seed.
inline uint64_t substream_seed(uint64_t seed, const std::string& name) {
  uint64_t h = fnv1a(name);
  h = fnv1a_bytes(&seed, sizeof(seed), h);
  return h;
}

}  // namespace sda
