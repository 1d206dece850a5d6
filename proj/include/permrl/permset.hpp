#pragma once

/**
 * @file permset.hpp
 * @brief Permutations of sample parts and the pre-selected, maximally
 * diverse permutation pool used as classification targets.
 *
 * Indices are 0-based everywhere, in memory and on disk. A permutation
 * applied to parts (x_0, ..., x_{n-1}) yields (x_{p[0]}, ..., x_{p[n-1]}).
 * (Written 1-based in the usual mathematical notation.)
 */

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "permrl/errors.hpp"

namespace permrl::permset {

class Permutation {
 public:
  /// Throws InvalidInput unless `indices` is a bijection on {0..n-1} with n >= 2.
  explicit Permutation(std::vector<std::size_t> indices);

  static Permutation identity(std::size_t n);

  std::size_t size() const noexcept { return indices_.size(); }
  std::span<const std::size_t> indices() const noexcept { return indices_; }
  std::size_t operator[](std::size_t j) const noexcept { return indices_[j]; }
  bool is_identity() const noexcept;

  /// (this ∘ other): result[j] = this[other[j]].
  Permutation compose(const Permutation& other) const;

  std::string to_string() const;

  friend auto operator<=>(const Permutation&, const Permutation&) = default;
  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> indices_;
};

/// output[j] = parts[perm[j]].
template <class T>
std::vector<T> apply(const Permutation& perm, std::span<const T> parts) {
  if (parts.size() != perm.size()) {
    throw InvalidInput("apply: permutation of length " + std::to_string(perm.size()) +
                       " applied to " + std::to_string(parts.size()) + " parts");
  }
  std::vector<T> out;
  out.reserve(parts.size());
  for (const std::size_t src : perm.indices()) out.push_back(parts[src]);
  return out;
}

template <class T>
std::vector<T> apply(const Permutation& perm, const std::vector<T>& parts) {
  return apply(perm, std::span<const T>(parts));
}

Permutation invert(const Permutation& perm);

/// Number of positions where the two index sequences disagree. Never 1.
std::size_t hamming(const Permutation& a, const Permutation& b);

/// n! saturated at SIZE_MAX.
std::size_t factorial(std::size_t n) noexcept;

class PermutationSet {
 public:
  /// Validates that all permutations are distinct and share length n.
  PermutationSet(std::size_t n, std::vector<Permutation> perms, std::uint64_t seed);

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return perms_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  /// 0 when the set holds fewer than two permutations.
  std::size_t min_pairwise_hamming() const noexcept { return min_pairwise_hamming_; }

  const Permutation& operator[](std::size_t i) const noexcept { return perms_[i]; }
  const std::vector<Permutation>& perms() const noexcept { return perms_; }
  auto begin() const noexcept { return perms_.begin(); }
  auto end() const noexcept { return perms_.end(); }

  friend bool operator==(const PermutationSet& a, const PermutationSet& b) {
    return a.n_ == b.n_ && a.seed_ == b.seed_ && a.perms_ == b.perms_;
  }

 private:
  std::size_t n_;
  std::vector<Permutation> perms_;
  std::uint64_t seed_;
  std::size_t min_pairwise_hamming_ = 0;
};

/// Size of the random candidate pool used when n! is too large to enumerate.
inline constexpr std::size_t kRandomCandidatePool = 100'000;
/// Largest n whose full symmetric group is enumerated as candidates.
inline constexpr std::size_t kMaxExhaustiveN = 9;

/**
 * Greedy max-min Hamming selection.
 *
 * The first permutation is drawn uniformly from the candidates with `seed`.
 * Every further pick maximizes the minimum Hamming distance to everything
 * chosen so far; ties go to the larger sum of distances, then to the
 * lexicographically smallest candidate. Candidates are all of S_n for
 * n <= 9, otherwise 100,000 seeded distinct random permutations.
 *
 * Throws Infeasible when size exceeds n! or the candidate pool.
 */
PermutationSet generate_set(std::size_t n, std::size_t size, std::uint64_t seed);

/// JSON text: {"n": .., "seed": .., "permutations": [[..], ..]}, one row per line.
std::string to_json(const PermutationSet& set);
/// Throws ParseError (syntax, missing/mistyped fields) or ValidationError
/// (bijection, duplicate or length violations) naming the offending field.
PermutationSet from_json(const std::string& text);

void save_set(const PermutationSet& set, const std::filesystem::path& path);
PermutationSet load_set(const std::filesystem::path& path);

}  // namespace permrl::permset
