#include "permrl/nn/param_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "permrl/errors.hpp"

namespace permrl::nn {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double get_f64(const char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace

ParamId ParamStore::add(std::string name, Matrix init) {
  if (find(name)) throw InvalidInput("duplicate parameter name '" + name + "'");
  Matrix grad = Matrix::Zero(init.rows(), init.cols());
  params_.push_back(Param{std::move(name), std::move(init), std::move(grad)});
  return params_.size() - 1;
}

std::optional<ParamId> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  return std::nullopt;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.grad.setZero();
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void save_checkpoint(const ParamStore& store, const std::filesystem::path& path) {
  nlohmann::ordered_json header = nlohmann::ordered_json::object();
  std::string payload;
  for (const auto& p : store) {
    header[p.name] = {p.value.rows(), p.value.cols()};
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put_f64(payload, p.value.data()[i]);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<std::pair<std::string, Matrix>> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError(path.string() + ": missing header line");
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": bad checkpoint header at byte " + std::to_string(e.byte));
  }
  if (!header.is_object()) throw ParseError(path.string() + ": checkpoint header must be an object");
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::size_t offset = nl + 1;
  for (const auto& [name, shape] : header.items()) {
    if (!shape.is_array() || shape.size() != 2 || !shape[0].is_number_unsigned() || !shape[1].is_number_unsigned()) {
      throw ParseError(path.string() + ": tensor '" + name + "' needs a [rows, cols] shape");
    }
    const auto rows = shape[0].get<Eigen::Index>();
    const auto cols = shape[1].get<Eigen::Index>();
    const std::size_t need = static_cast<std::size_t>(rows * cols) * 8;
    if (offset + need > bytes.size()) {
      throw ParseError(path.string() + ": payload truncated in tensor '" + name + "' (expected " +
                       std::to_string(offset + need) + " bytes, have " + std::to_string(bytes.size()) + ")");
    }
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get_f64(bytes.data() + offset + 8 * i);
    offset += need;
    tensors.emplace_back(name, std::move(m));
  }
  if (offset != bytes.size()) {
    throw ParseError(path.string() + ": " + std::to_string(bytes.size() - offset) + " trailing payload bytes");
  }
  return tensors;
}

void load_checkpoint(ParamStore& store, const std::filesystem::path& path) {
  auto tensors = read_checkpoint(path);
  if (tensors.size() != store.size()) {
    throw InvalidInput(path.string() + ": checkpoint has " + std::to_string(tensors.size()) +
                       " tensors, model expects " + std::to_string(store.size()));
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& p = store[i];
    const auto& [name, m] = tensors[i];
    if (name != p.name || m.rows() != p.value.rows() || m.cols() != p.value.cols()) {
      throw InvalidInput(path.string() + ": tensor " + std::to_string(i) + " is '" + name + "' " +
                         std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", model expects '" + p.name +
                         "' " + std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    }
    p.value = m;
  }
}

}  // namespace permrl::nn
