#include "permrl/toydata.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

#include <json.hpp>

#include "permrl/errors.hpp"

namespace permrl::toydata {

namespace {

using nn::Matrix;
using nn::Rng;

constexpr double kPi = std::numbers::pi;

// Values are kept float-representable so the f32 file payload round-trips.
double quantize(double v) { return static_cast<double>(static_cast<float>(v)); }

void rescale_unit(std::vector<double>& px) {
  const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
  const double a = *lo;
  const double span = *hi - *lo;
  for (double& v : px) v = span > 0.0 ? quantize((v - a) / span) : 0.0;
}

double gauss2(double dx, double dy, double sigma) { return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)); }

Sample render_spatial(const DatasetSpec& spec, std::uint32_t label, Rng& rng) {
  const std::size_t m = spec.grid;
  const std::size_t e = spec.extent;
  const double S = static_cast<double>(m * e);
  const double nc = static_cast<double>(spec.n_classes);

  const double theta = 2.0 * kPi * label / nc + rng.uniform(-0.35, 0.35);
  const double ramp = rng.uniform(0.5, 1.0);
  const double bump_sign = (label % 2 == 0) ? 1.0 : -1.0;
  const double bump_sigma = S * (0.22 + 0.08 * static_cast<double>(label % 3) / 2.0) * rng.uniform(0.85, 1.15);
  const double cx = S / 2.0 + rng.normal() * 0.10 * S;
  const double cy = S / 2.0 + rng.normal() * 0.10 * S;
  const std::size_t n_blobs = 2 + label % 3;
  struct Blob {
    double x, y, sigma, amp;
  };
  std::vector<Blob> blobs;
  for (std::size_t b = 0; b < n_blobs; ++b) {
    blobs.push_back({rng.uniform(0.0, S), rng.uniform(0.0, S), S * rng.uniform(0.04, 0.09),
                     rng.uniform(0.25, 0.5) * (rng.uniform() < 0.5 ? -1.0 : 1.0)});
  }

  const std::size_t side = m * e;
  std::vector<double> px(side * side);
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double fx = static_cast<double>(x) + 0.5;
      const double fy = static_cast<double>(y) + 0.5;
      double v = ramp * ((fx - S / 2.0) * std::cos(theta) + (fy - S / 2.0) * std::sin(theta)) / S;
      v += bump_sign * gauss2(fx - cx, fy - cy, bump_sigma);
      for (const Blob& b : blobs) v += b.amp * gauss2(fx - b.x, fy - b.y, b.sigma);
      px[y * side + x] = v;
    }
  }
  rescale_unit(px);

  Sample s;
  s.label = label;
  s.parts = Matrix(static_cast<Eigen::Index>(m * m), static_cast<Eigen::Index>(e * e));
  for (std::size_t tr = 0; tr < m; ++tr) {
    for (std::size_t tc = 0; tc < m; ++tc) {
      const auto part = static_cast<Eigen::Index>(tr * m + tc);
      for (std::size_t y = 0; y < e; ++y) {
        for (std::size_t x = 0; x < e; ++x) {
          s.parts(part, static_cast<Eigen::Index>(y * e + x)) = px[(tr * e + y) * side + tc * e + x];
        }
      }
    }
  }
  return s;
}

Sample render_temporal(const DatasetSpec& spec, std::uint32_t label, Rng& rng) {
  const std::size_t u = spec.frames;
  const std::size_t e = spec.extent;
  const double E = static_cast<double>(e);
  const double nc = static_cast<double>(spec.n_classes);

  const double heading = 2.0 * kPi * label / nc + rng.uniform(-0.3, 0.3);
  const double travel = E * rng.uniform(0.35, 0.55);  // total displacement over the sequence
  const double step = travel / static_cast<double>(u - 1);
  const double dx = std::cos(heading);
  const double dy = std::sin(heading);
  const double x0 = E / 2.0 - 0.5 * travel * dx + rng.normal() * 0.06 * E;
  const double y0 = E / 2.0 - 0.5 * travel * dy + rng.normal() * 0.06 * E;
  const double sigma0 = E * rng.uniform(0.10, 0.15);
  const double growth = rng.uniform(0.4, 0.8);
  // Static background texture shared by all frames.
  const double k1 = rng.uniform(0.5, 1.5) * 2.0 * kPi / E;
  const double k2 = rng.uniform(0.5, 1.5) * 2.0 * kPi / E;
  const double ph1 = rng.uniform(0.0, 2.0 * kPi);
  const double ph2 = rng.uniform(0.0, 2.0 * kPi);
  const double bg = rng.uniform(0.08, 0.2);

  std::vector<double> px(u * e * e);
  for (std::size_t t = 0; t < u; ++t) {
    const double frac = static_cast<double>(t) / static_cast<double>(u - 1);
    const double cx = x0 + step * static_cast<double>(t) * dx;
    const double cy = y0 + step * static_cast<double>(t) * dy;
    const double sigma = sigma0 * (1.0 + growth * frac);
    for (std::size_t y = 0; y < e; ++y) {
      for (std::size_t x = 0; x < e; ++x) {
        const double fx = static_cast<double>(x) + 0.5;
        const double fy = static_cast<double>(y) + 0.5;
        const double texture = bg * (std::sin(k1 * fx + ph1) * std::cos(k2 * fy + ph2));
        px[(t * e + y) * e + x] = gauss2(fx - cx, fy - cy, sigma) + texture;
      }
    }
  }
  rescale_unit(px);

  Sample s;
  s.label = label;
  s.parts = Matrix(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(e * e));
  for (std::size_t t = 0; t < u; ++t) {
    for (std::size_t k = 0; k < e * e; ++k) s.parts(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = px[t * e * e + k];
  }
  return s;
}

template <class Render>
Dataset generate_with(const DatasetSpec& spec, Render render) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  const Rng root(spec.seed);
  auto fill = [&](std::vector<Sample>& out, std::size_t count, const char* key) {
    Rng rng = root.fork(key);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      out.push_back(render(spec, static_cast<std::uint32_t>(i % spec.n_classes), rng));
    }
  };
  fill(d.train, spec.train, "train");
  fill(d.val, spec.val, "val");
  fill(d.test, spec.test, "test");
  return d;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  return v;
}

}  // namespace

std::string to_string(Kind kind) { return kind == Kind::kSpatial ? "spatial" : "temporal"; }

Kind kind_from_string(const std::string& s) {
  if (s == "spatial") return Kind::kSpatial;
  if (s == "temporal") return Kind::kTemporal;
  throw InvalidInput("unknown dataset kind '" + s + "' (expected spatial or temporal)");
}

void DatasetSpec::validate() const {
  if (kind == Kind::kSpatial && grid < 2) throw InvalidInput("dataset: grid (m) must be at least 2");
  if (kind == Kind::kTemporal && frames < 2) throw InvalidInput("dataset: frames (u) must be at least 2");
  if (extent < 2) throw InvalidInput("dataset: extent must be at least 2");
  if (n_classes < 1) throw InvalidInput("dataset: n_classes must be at least 1");
  if (train < 1 || val < 1 || test < 1) throw InvalidInput("dataset: split counts must be at least 1");
}

const std::vector<Sample>& Dataset::split(Split s) const {
  switch (s) {
    case Split::kTrain:
      return train;
    case Split::kVal:
      return val;
    case Split::kTest:
      return test;
  }
  return train;
}

Dataset gen_spatial_dataset(const DatasetSpec& spec) {
  if (spec.kind != Kind::kSpatial) throw InvalidInput("gen_spatial_dataset: spec.kind must be spatial");
  return generate_with(spec, render_spatial);
}

Dataset gen_temporal_dataset(const DatasetSpec& spec) {
  if (spec.kind != Kind::kTemporal) throw InvalidInput("gen_temporal_dataset: spec.kind must be temporal");
  return generate_with(spec, render_temporal);
}

Dataset generate(const DatasetSpec& spec) {
  return spec.kind == Kind::kSpatial ? gen_spatial_dataset(spec) : gen_temporal_dataset(spec);
}

void normalize_part(Eigen::Ref<nn::RowVector> part) {
  part.array() -= part.mean();
  const double mx = part.cwiseAbs().maxCoeff();
  if (mx > 0.0) part /= mx;
}

PermutedBatch make_permuted_batch(std::span<const Sample> samples, const permset::PermutationSet& perms,
                                  std::span<const Assignment> assignments, double jitter, nn::Rng* rng) {
  PermutedBatch out;
  const std::size_t parts = perms.n();
  std::size_t dim = samples.empty() ? 0 : static_cast<std::size_t>(samples[0].parts.cols());
  out.inputs.batch = assignments.size();
  out.inputs.parts = parts;
  out.inputs.values.resize(static_cast<Eigen::Index>(assignments.size() * parts), static_cast<Eigen::Index>(dim));
  out.labels.reserve(assignments.size());
  for (std::size_t b = 0; b < assignments.size(); ++b) {
    const auto [sid, pid] = assignments[b];
    if (sid >= samples.size()) {
      throw InvalidInput("make_permuted_batch: sample id " + std::to_string(sid) + " out of range (" +
                         std::to_string(samples.size()) + " samples)");
    }
    if (pid >= perms.size()) {
      throw InvalidInput("make_permuted_batch: permutation id " + std::to_string(pid) + " out of range (" +
                         std::to_string(perms.size()) + " permutations)");
    }
    const Matrix& src = samples[sid].parts;
    if (static_cast<std::size_t>(src.rows()) != parts || static_cast<std::size_t>(src.cols()) != dim) {
      throw InvalidInput("make_permuted_batch: sample " + std::to_string(sid) + " has shape " +
                         std::to_string(src.rows()) + "x" + std::to_string(src.cols()) +
                         ", permutation set expects " + std::to_string(parts) + " parts");
    }
    const auto& perm = perms[pid];
    for (std::size_t j = 0; j < parts; ++j) {
      auto dst = out.inputs.part(b, j);
      dst = src.row(static_cast<Eigen::Index>(perm[j]));
      if (rng != nullptr && jitter > 0.0) {
        for (Eigen::Index k = 0; k < dst.size(); ++k) dst(k) += rng->uniform(-jitter, jitter);
      }
      normalize_part(dst);
    }
    out.labels.push_back(pid);
  }
  return out;
}

nn::PartBatch make_plain_batch(std::span<const Sample> samples, std::span<const std::size_t> ids) {
  nn::PartBatch out;
  if (ids.empty()) return out;
  const Eigen::Index parts = samples[ids[0]].parts.rows();
  const Eigen::Index dim = samples[ids[0]].parts.cols();
  out.batch = ids.size();
  out.parts = static_cast<std::size_t>(parts);
  out.values.resize(static_cast<Eigen::Index>(ids.size()) * parts, dim);
  for (std::size_t b = 0; b < ids.size(); ++b) {
    if (ids[b] >= samples.size()) throw InvalidInput("make_plain_batch: sample id out of range");
    const Matrix& src = samples[ids[b]].parts;
    if (src.rows() != parts || src.cols() != dim) throw InvalidInput("make_plain_batch: ragged samples");
    out.values.middleRows(static_cast<Eigen::Index>(b) * parts, parts) = src;
    for (Eigen::Index p = 0; p < parts; ++p) normalize_part(out.part(b, static_cast<std::size_t>(p)));
  }
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  const auto& s = data.spec;
  nlohmann::ordered_json header;
  header["format"] = "permrl-dataset-v1";
  header["kind"] = to_string(s.kind);
  header["grid"] = s.grid;
  header["frames"] = s.frames;
  header["extent"] = s.extent;
  header["n_classes"] = s.n_classes;
  header["seed"] = s.seed;
  header["counts"] = {{"train", data.train.size()}, {"val", data.val.size()}, {"test", data.test.size()}};
  header["parts"] = s.parts();
  header["part_dim"] = s.part_dim();

  std::string payload;
  std::string labels;
  for (const auto* split : {&data.train, &data.val, &data.test}) {
    for (const Sample& sample : *split) {
      for (Eigen::Index i = 0; i < sample.parts.size(); ++i) {
        put_u32(payload, std::bit_cast<std::uint32_t>(static_cast<float>(sample.parts.data()[i])));
      }
      put_u32(labels, sample.label);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out.write(labels.data(), static_cast<std::streamsize>(labels.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw ParseError(path.string() + ": no header line terminator found");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": malformed header at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  DatasetSpec spec;
  std::size_t parts = 0;
  std::size_t part_dim = 0;
  try {
    spec.kind = kind_from_string(h.at("kind").get<std::string>());
    spec.grid = h.at("grid").get<std::size_t>();
    spec.frames = h.at("frames").get<std::size_t>();
    spec.extent = h.at("extent").get<std::size_t>();
    spec.n_classes = h.at("n_classes").get<std::size_t>();
    spec.seed = h.at("seed").get<std::uint64_t>();
    spec.train = h.at("counts").at("train").get<std::size_t>();
    spec.val = h.at("counts").at("val").get<std::size_t>();
    spec.test = h.at("counts").at("test").get<std::size_t>();
    parts = h.at("parts").get<std::size_t>();
    part_dim = h.at("part_dim").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": header field error: " + e.what());
  } catch (const InvalidInput& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (parts != spec.parts()) {
    throw ValidationError(path.string() + ": header declares " + std::to_string(parts) + " parts per sample but " +
                          (spec.kind == Kind::kSpatial ? "m*m = " : "u = ") + std::to_string(spec.parts()));
  }
  if (part_dim != spec.part_dim()) {
    throw ValidationError(path.string() + ": header declares part_dim " + std::to_string(part_dim) +
                          " but extent^2 = " + std::to_string(spec.part_dim()));
  }
  try {
    spec.validate();
  } catch (const InvalidInput& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }

  const std::size_t total = spec.train + spec.val + spec.test;
  const std::size_t expected = nl + 1 + total * parts * part_dim * 4 + total * 4;
  if (bytes.size() != expected) {
    throw ParseError(path.string() + ": payload size mismatch: expected " + std::to_string(expected) +
                     " bytes in total, got " + std::to_string(bytes.size()));
  }
  Dataset d;
  d.spec = spec;
  std::size_t offset = nl + 1;
  std::size_t label_offset = nl + 1 + total * parts * part_dim * 4;
  for (auto [split, count] : {std::pair{&d.train, spec.train}, std::pair{&d.val, spec.val}, std::pair{&d.test, spec.test}}) {
    split->reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Sample s;
      s.parts.resize(static_cast<Eigen::Index>(parts), static_cast<Eigen::Index>(part_dim));
      for (Eigen::Index k = 0; k < s.parts.size(); ++k) {
        s.parts.data()[k] = static_cast<double>(std::bit_cast<float>(get_u32(bytes.data() + offset)));
        offset += 4;
      }
      s.label = get_u32(bytes.data() + label_offset);
      label_offset += 4;
      if (s.label >= spec.n_classes) {
        throw ValidationError(path.string() + ": label " + std::to_string(s.label) + " at byte " +
                              std::to_string(label_offset - 4) + " exceeds n_classes");
      }
      split->push_back(std::move(s));
    }
  }
  return d;
}

}  // namespace permrl::toydata
