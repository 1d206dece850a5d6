#include "permrl/permset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "permrl/nn/rng.hpp"

namespace permrl::permset {

namespace {

bool is_bijection(std::span<const std::size_t> idx) {
  std::vector<bool> seen(idx.size(), false);
  for (const std::size_t v : idx) {
    if (v >= idx.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

// Candidates stored flat, n bytes per permutation, in lexicographic order.
struct CandidatePool {
  std::size_t n = 0;
  std::vector<std::uint8_t> data;

  std::size_t count() const { return n == 0 ? 0 : data.size() / n; }
  const std::uint8_t* row(std::size_t i) const { return data.data() + i * n; }
};

CandidatePool enumerate_all(std::size_t n) {
  CandidatePool pool{n, {}};
  std::vector<std::uint8_t> p(n);
  std::iota(p.begin(), p.end(), std::uint8_t{0});
  pool.data.reserve(factorial(n) * n);
  do {
    pool.data.insert(pool.data.end(), p.begin(), p.end());
  } while (std::next_permutation(p.begin(), p.end()));
  return pool;
}

CandidatePool random_pool(std::size_t n, std::size_t count, std::uint64_t seed) {
  nn::Rng rng(nn::derive_seed(seed, "permset.pool"));
  std::set<std::vector<std::uint8_t>> unique;
  std::vector<std::uint8_t> p(n);
  while (unique.size() < count) {
    std::iota(p.begin(), p.end(), std::uint8_t{0});
    rng.shuffle(p);
    unique.insert(p);
  }
  CandidatePool pool{n, {}};
  pool.data.reserve(count * n);
  for (const auto& row : unique) pool.data.insert(pool.data.end(), row.begin(), row.end());
  return pool;
}

std::size_t row_distance(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
  std::size_t d = 0;
  for (std::size_t j = 0; j < n; ++j) d += a[j] != b[j];
  return d;
}

}  // namespace

Permutation::Permutation(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  if (indices_.size() < 2) {
    throw InvalidInput("permutation needs at least 2 elements, got " +
                       std::to_string(indices_.size()));
  }
  if (!is_bijection(indices_)) throw InvalidInput("not a bijection: " + to_string());
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return Permutation(std::move(idx));
}

bool Permutation::is_identity() const noexcept {
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (indices_[j] != j) return false;
  }
  return true;
}

Permutation Permutation::compose(const Permutation& other) const {
  if (other.size() != size()) throw InvalidInput("compose: length mismatch");
  std::vector<std::size_t> out(size());
  for (std::size_t j = 0; j < size(); ++j) out[j] = indices_[other.indices_[j]];
  return Permutation(std::move(out));
}

std::string Permutation::to_string() const {
  std::string s = "(";
  for (std::size_t j = 0; j < indices_.size(); ++j) {
    if (j) s += ',';
    s += std::to_string(indices_[j]);
  }
  return s + ")";
}

Permutation invert(const Permutation& perm) {
  std::vector<std::size_t> inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  return Permutation(std::move(inv));
}

std::size_t hamming(const Permutation& a, const Permutation& b) {
  if (a.size() != b.size()) {
    throw InvalidInput("hamming: lengths " + std::to_string(a.size()) + " and " +
                       std::to_string(b.size()) + " differ");
  }
  std::size_t d = 0;
  for (std::size_t j = 0; j < a.size(); ++j) d += a[j] != b[j];
  return d;
}

std::size_t factorial(std::size_t n) noexcept {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= n; ++k) {
    if (f > std::numeric_limits<std::size_t>::max() / k) return std::numeric_limits<std::size_t>::max();
    f *= k;
  }
  return f;
}

PermutationSet::PermutationSet(std::size_t n, std::vector<Permutation> perms, std::uint64_t seed)
    : n_(n), perms_(std::move(perms)), seed_(seed) {
  std::set<Permutation> seen;
  for (std::size_t i = 0; i < perms_.size(); ++i) {
    if (perms_[i].size() != n_) {
      throw ValidationError("permutations[" + std::to_string(i) + "] has length " +
                            std::to_string(perms_[i].size()) + ", expected " + std::to_string(n_));
    }
    if (!seen.insert(perms_[i]).second) {
      throw ValidationError("permutations[" + std::to_string(i) + "] duplicates an earlier row " +
                            perms_[i].to_string());
    }
  }
  if (perms_.size() >= 2) {
    min_pairwise_hamming_ = n_;
    for (std::size_t i = 0; i < perms_.size(); ++i) {
      for (std::size_t j = i + 1; j < perms_.size(); ++j) {
        min_pairwise_hamming_ = std::min(min_pairwise_hamming_, hamming(perms_[i], perms_[j]));
      }
    }
  }
}

PermutationSet generate_set(std::size_t n, std::size_t size, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("generate_set: n must be at least 2");
  if (size < 1) throw InvalidInput("generate_set: size must be at least 1");
  if (n > 255) throw InvalidInput("generate_set: n above 255 is not supported");
  const std::size_t total = factorial(n);
  if (size > total) {
    throw Infeasible("generate_set: " + std::to_string(size) + " distinct permutations requested but " +
                     std::to_string(n) + "! = " + std::to_string(total));
  }
  const CandidatePool pool =
      n <= kMaxExhaustiveN ? enumerate_all(n) : random_pool(n, kRandomCandidatePool, seed);
  const std::size_t count = pool.count();
  if (size > count) {
    throw Infeasible("generate_set: " + std::to_string(size) + " permutations requested from a pool of " +
                     std::to_string(count));
  }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<bool> chosen(count, false);
  std::vector<std::size_t> min_d(count, kNone);
  std::vector<std::size_t> sum_d(count, 0);
  std::vector<std::size_t> order;
  order.reserve(size);

  nn::Rng rng(nn::derive_seed(seed, "permset.first"));
  std::size_t pick = rng.below(count);
  for (;;) {
    order.push_back(pick);
    chosen[pick] = true;
    if (order.size() == size) break;
    const std::uint8_t* last = pool.row(pick);
    std::size_t best = kNone;
    for (std::size_t c = 0; c < count; ++c) {
      if (chosen[c]) continue;
      const std::size_t d = row_distance(pool.row(c), last, n);
      min_d[c] = std::min(min_d[c], d);
      sum_d[c] += d;
      // Strict comparisons keep the lexicographically smallest on full ties.
      if (best == kNone || min_d[c] > min_d[best] ||
          (min_d[c] == min_d[best] && sum_d[c] > sum_d[best])) {
        best = c;
      }
    }
    pick = best;
  }

  std::vector<Permutation> perms;
  perms.reserve(size);
  for (const std::size_t idx : order) {
    const std::uint8_t* r = pool.row(idx);
    perms.emplace_back(std::vector<std::size_t>(r, r + n));
  }
  return PermutationSet(n, std::move(perms), seed);
}

std::string to_json(const PermutationSet& set) {
  std::ostringstream os;
  os << "{\n  \"n\": " << set.n() << ",\n  \"seed\": " << set.seed() << ",\n  \"permutations\": [";
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << (i ? ",\n    [" : "\n    [");
    const auto idx = set[i].indices();
    for (std::size_t j = 0; j < idx.size(); ++j) os << (j ? "," : "") << idx[j];
    os << ']';
  }
  os << (set.size() ? "\n  ]\n}\n" : "]\n}\n");
  return os.str();
}

PermutationSet from_json(const std::string& text) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line number for the message.
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ParseError("permutation set: JSON syntax error at line " + std::to_string(line) + " (byte " +
                     std::to_string(e.byte) + "): " + e.what());
  }
  if (!doc.is_object()) throw ParseError("permutation set: top level must be an object");
  auto require_uint = [&](const char* field) -> std::uint64_t {
    if (!doc.contains(field)) throw ParseError(std::string("permutation set: missing field '") + field + "'");
    const json& v = doc[field];
    if (!v.is_number_unsigned()) {
      throw ParseError(std::string("permutation set: field '") + field + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  };
  const std::size_t n = require_uint("n");
  const std::uint64_t seed = require_uint("seed");
  if (!doc.contains("permutations") || !doc["permutations"].is_array()) {
    throw ParseError("permutation set: field 'permutations' must be an array");
  }
  std::vector<Permutation> perms;
  const json& rows = doc["permutations"];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string where = "permutations[" + std::to_string(i) + "]";
    if (!rows[i].is_array()) throw ParseError("permutation set: " + where + " is not an array");
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      if (!rows[i][j].is_number_unsigned()) {
        throw ParseError("permutation set: " + where + "[" + std::to_string(j) + "] is not a non-negative integer");
      }
      idx.push_back(rows[i][j].get<std::size_t>());
    }
    if (idx.size() != n) {
      throw ValidationError("permutation set: " + where + " has length " + std::to_string(idx.size()) +
                            ", expected n = " + std::to_string(n));
    }
    if (!is_bijection(idx)) {
      throw ValidationError("permutation set: " + where + " is not a bijection on {0.." +
                            std::to_string(n - 1) + "}");
    }
    perms.emplace_back(std::move(idx));
  }
  return PermutationSet(n, std::move(perms), seed);
}

void save_set(const PermutationSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json(set);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

PermutationSet load_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace permrl::permset
