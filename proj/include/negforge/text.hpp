#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace negforge {

// Small string helpers shared by the modules. ASCII-only case mapping; bytes
// >= 0x80 pass through untouched.

std::vector<std::string> split_ws(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_spaces(std::string_view s);
bool is_ascii_upper(char c);
bool is_ascii_lower(char c);
bool is_ascii_alpha(char c);
bool is_ascii_alnum(char c);

/// Uppercases the first byte if it is an ASCII lowercase letter.
std::string capitalize_first(std::string s);
/// Applies the case of `model`'s first letter to `s`'s first letter.
std::string match_initial_case(std::string s, std::string_view model);

/// Decodes UTF-8 into code points; invalid bytes map to themselves.
std::vector<char32_t> utf8_codepoints(std::string_view s);

/// FNV-1a, 64 bit. Stable across platforms; used for per-sentence seeds.
std::uint64_t stable_hash(std::string_view s);
/// splitmix64 finalizer, used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator with platform-independent derived distributions.
/// std::uniform_int_distribution and std::shuffle are implementation-defined,
/// so they are avoided wherever byte-identical output is required.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform real in [0, 1).
  double unit();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

  /// k distinct indices from [0, n), returned in increasing order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

}  // namespace negforge
