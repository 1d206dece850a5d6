#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "permrl/nn/matrix.hpp"

namespace permrl::nn {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;  // same shape as value
};

using ParamId = std::size_t;

/// Named parameter tensors with paired gradient buffers. Layers refer to
/// their tensors by ParamId, so copying a store copies a whole model.
class ParamStore {
 public:
  /// Throws InvalidInput on duplicate names.
  ParamId add(std::string name, Matrix init);

  std::size_t size() const noexcept { return params_.size(); }
  Param& operator[](ParamId id) { return params_[id]; }
  const Param& operator[](ParamId id) const { return params_[id]; }
  Matrix& value(ParamId id) { return params_[id].value; }
  const Matrix& value(ParamId id) const { return params_[id].value; }
  Matrix& grad(ParamId id) { return params_[id].grad; }
  const Matrix& grad(ParamId id) const { return params_[id].grad; }

  std::optional<ParamId> find(std::string_view name) const;

  void zero_grad();
  /// Total number of scalar parameters.
  std::size_t scalar_count() const noexcept;

  std::uint64_t updates() const noexcept { return updates_; }
  void mark_update() noexcept { ++updates_; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::vector<Param> params_;
  std::uint64_t updates_ = 0;
};

/**
 * Checkpoint layout: one JSON header line mapping tensor name -> [rows, cols]
 * (in store order), a newline, then every tensor's values as little-endian
 * 64-bit floats, row-major, in header order.
 */
void save_checkpoint(const ParamStore& store, const std::filesystem::path& path);

/// Raw tensors of a checkpoint file, in file order. Throws ParseError on a
/// malformed header or a payload of the wrong length.
std::vector<std::pair<std::string, Matrix>> read_checkpoint(const std::filesystem::path& path);

/// Loads values into an existing store. Names and shapes must match exactly
/// (InvalidInput otherwise).
void load_checkpoint(ParamStore& store, const std::filesystem::path& path);

}  // namespace permrl::nn
