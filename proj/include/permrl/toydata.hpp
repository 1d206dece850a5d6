#pragma once

/**
 * @file toydata.hpp
 * @brief Procedural toy images (cut into tiles) and short motion sequences
 * (frames) whose part order can be recovered from content.
 *
 * Samples are stored raw, in [0, 1], parts in original order. Per-part
 * normalization (zero mean, unit max-abs) and jitter happen when a permuted
 * batch is assembled, like augmentation in a data loader.
 */

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "permrl/nn/matrix.hpp"
#include "permrl/nn/part_batch.hpp"
#include "permrl/nn/rng.hpp"
#include "permrl/permset.hpp"

namespace permrl::toydata {

enum class Kind { kSpatial, kTemporal };

std::string to_string(Kind kind);
Kind kind_from_string(const std::string& s);

struct DatasetSpec {
  Kind kind = Kind::kSpatial;
  std::size_t grid = 2;     // m: tiles per side, spatial only
  std::size_t frames = 4;   // u: frames per sequence, temporal only
  std::size_t extent = 8;   // tile / frame side in pixels
  std::size_t n_classes = 8;
  std::size_t train = 2048;
  std::size_t val = 100;
  std::size_t test = 512;
  std::uint64_t seed = 0;

  std::size_t parts() const noexcept { return kind == Kind::kSpatial ? grid * grid : frames; }
  std::size_t part_dim() const noexcept { return extent * extent; }
  /// Throws InvalidInput listing the first violated constraint.
  void validate() const;

  bool operator==(const DatasetSpec&) const = default;
};

/// One tiled image or frame sequence: parts x part_dim, values in [0, 1].
struct Sample {
  std::uint32_t label = 0;
  nn::Matrix parts;

  bool operator==(const Sample& o) const { return label == o.label && parts == o.parts; }
};

enum class Split { kTrain, kVal, kTest };

struct Dataset {
  DatasetSpec spec;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;

  const std::vector<Sample>& split(Split s) const;
  bool operator==(const Dataset&) const = default;
};

/// Classes are global patterns (an oriented ramp, a bright or dark central
/// bump and a few small blobs) rendered on an (m*extent)^2 canvas and cut
/// into m*m tiles, row-major. Labels are assigned round-robin per split.
Dataset gen_spatial_dataset(const DatasetSpec& spec);

/// Classes are motion laws: a growing blob translating with a class-specific
/// heading over a static textured background, sampled at u time steps.
Dataset gen_temporal_dataset(const DatasetSpec& spec);

/// Dispatches on spec.kind.
Dataset generate(const DatasetSpec& spec);

/// In place: subtract the mean, then divide by the max absolute value
/// (left at zero for a constant part).
void normalize_part(Eigen::Ref<nn::RowVector> part);

struct Assignment {
  std::size_t sample = 0;
  std::size_t perm = 0;
};

struct PermutedBatch {
  nn::PartBatch inputs;
  std::vector<std::size_t> labels;  // permutation index per sample
};

inline constexpr double kDefaultJitter = 0.05;

/**
 * Shuffles every assigned sample's parts by its permutation (output part j
 * is input part perm[j]), adds per-pixel uniform noise in +-jitter when a
 * generator is given, then normalizes each part. Throws InvalidInput on an
 * out-of-range sample or permutation id.
 */
PermutedBatch make_permuted_batch(std::span<const Sample> samples, const permset::PermutationSet& perms,
                                  std::span<const Assignment> assignments, double jitter = 0.0,
                                  nn::Rng* rng = nullptr);

/// Normalized parts in original order (no permutation, no jitter).
nn::PartBatch make_plain_batch(std::span<const Sample> samples, std::span<const std::size_t> ids);

/**
 * File layout: one JSON header line (spec, counts, shapes), then every
 * sample's values as little-endian 32-bit floats (train, val, test; samples
 * in index order; parts in original order), then all labels as little-endian
 * 32-bit unsigned integers in the same order.
 */
void save_dataset(const Dataset& data, const std::filesystem::path& path);
/// Throws ParseError (with byte offsets / expected vs actual sizes) or
/// ValidationError when the header contradicts itself.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace permrl::toydata
