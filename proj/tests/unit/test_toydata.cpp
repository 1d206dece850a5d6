#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "permrl/errors.hpp"
#include "permrl/permset.hpp"
#include "permrl/toydata.hpp"

using namespace permrl;
using namespace permrl::toydata;

namespace {

DatasetSpec small_spec(Kind kind, std::uint64_t seed = 3) {
  DatasetSpec s;
  s.kind = kind;
  s.train = 256;
  s.val = 40;
  s.test = 128;
  s.seed = seed;
  return s;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "permrl_unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Least-squares linear probe from single raw tiles to tile position.
double tile_position_probe(const Dataset& d) {
  const std::size_t parts = d.spec.parts();
  const auto dim = static_cast<Eigen::Index>(d.spec.part_dim());
  auto design = [&](const std::vector<Sample>& split, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
    const auto rows = static_cast<Eigen::Index>(split.size() * parts);
    x.resize(rows, dim + 1);
    y = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(parts));
    Eigen::Index r = 0;
    for (const auto& s : split) {
      for (std::size_t p = 0; p < parts; ++p, ++r) {
        x.row(r).head(dim) = s.parts.row(static_cast<Eigen::Index>(p));
        x(r, dim) = 1.0;
        y(r, static_cast<Eigen::Index>(p)) = 1.0;
      }
    }
  };
  Eigen::MatrixXd xt, yt, xe, ye;
  design(d.train, xt, yt);
  design(d.test, xe, ye);
  const Eigen::MatrixXd gram =
      xt.transpose() * xt + 1e-3 * Eigen::MatrixXd::Identity(xt.cols(), xt.cols());
  const Eigen::MatrixXd w = gram.ldlt().solve(xt.transpose() * yt);
  const Eigen::MatrixXd scores = xe * w;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index pred, truth;
    scores.row(r).maxCoeff(&pred);
    ye.row(r).maxCoeff(&truth);
    correct += pred == truth;
  }
  return static_cast<double>(correct) / static_cast<double>(scores.rows());
}

}  // namespace

TEST_CASE("spec validation") {
  DatasetSpec s;
  CHECK_NOTHROW(s.validate());
  s.grid = 1;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = DatasetSpec{};
  s.kind = Kind::kTemporal;
  s.frames = 1;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = DatasetSpec{};
  s.val = 0;
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  CHECK(DatasetSpec{}.val == 100);
  CHECK_THROWS_AS(kind_from_string("audio"), InvalidInput);
}

TEST_CASE("spatial generation is deterministic, bounded and balanced") {
  const auto spec = small_spec(Kind::kSpatial);
  const auto a = gen_spatial_dataset(spec);
  const auto b = gen_spatial_dataset(spec);
  CHECK(a == b);
  CHECK_FALSE(a == gen_spatial_dataset(small_spec(Kind::kSpatial, 4)));
  CHECK_THROWS_AS(gen_spatial_dataset(small_spec(Kind::kTemporal)), InvalidInput);
  for (auto split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto& samples = a.split(split);
    std::vector<std::size_t> counts(spec.n_classes, 0);
    for (const auto& s : samples) {
      CHECK(s.parts.rows() == 4);
      CHECK(s.parts.cols() == 64);
      CHECK(s.parts.minCoeff() >= 0.0);
      CHECK(s.parts.maxCoeff() <= 1.0);
      ++counts.at(s.label);
    }
    const double expected = static_cast<double>(samples.size()) / static_cast<double>(spec.n_classes);
    for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - expected) <= 1.0);
  }
}

TEST_CASE("single tiles reveal their position only partly") {
  const auto d = gen_spatial_dataset(small_spec(Kind::kSpatial));
  const double acc = tile_position_probe(d);
  MESSAGE("linear probe tile-position accuracy " << acc);
  CHECK(acc > 0.25);
  CHECK(acc < 1.0);
}

TEST_CASE("temporal generation") {
  const auto spec = small_spec(Kind::kTemporal);
  const auto a = gen_temporal_dataset(spec);
  CHECK(a == gen_temporal_dataset(spec));
  for (const auto& s : a.train) {
    CHECK(s.parts.rows() == 4);
    CHECK(s.parts.minCoeff() >= 0.0);
    CHECK(s.parts.maxCoeff() <= 1.0);
    for (Eigen::Index i = 0; i < s.parts.rows(); ++i)
      for (Eigen::Index j = i + 1; j < s.parts.rows(); ++j) CHECK(s.parts.row(i) != s.parts.row(j));
  }
  // No reversed sequence appears anywhere as a forward sequence.
  std::vector<const Sample*> all;
  for (auto split : {Split::kTrain, Split::kVal, Split::kTest})
    for (const auto& s : a.split(split)) all.push_back(&s);
  std::size_t collisions = 0;
  for (const auto* s : all) {
    const nn::Matrix reversed = s->parts.colwise().reverse();
    for (const auto* t : all) collisions += reversed == t->parts;
  }
  CHECK(collisions == 0);
}

TEST_CASE("normalization is per part") {
  const auto d = gen_spatial_dataset(small_spec(Kind::kSpatial));
  const std::vector<std::size_t> ids{0, 1, 2};
  const auto batch = make_plain_batch(d.train, ids);
  for (Eigen::Index r = 0; r < batch.values.rows(); ++r) {
    CHECK(std::abs(batch.values.row(r).mean()) < 1e-9);
    CHECK(batch.values.row(r).cwiseAbs().maxCoeff() == doctest::Approx(1.0));
  }
  nn::RowVector constant = nn::RowVector::Constant(5, 0.3);
  normalize_part(constant);
  CHECK(constant.isZero(0.0));
}

TEST_CASE("permuted batches") {
  const auto d = gen_spatial_dataset(small_spec(Kind::kSpatial));
  const auto perms = permset::generate_set(4, 24, 1);
  std::size_t identity = 0;
  while (!perms[identity].is_identity()) ++identity;

  const std::vector<Assignment> plain{{3, identity}, {5, identity}};
  const std::vector<std::size_t> ids{3, 5};
  CHECK(make_permuted_batch(d.train, perms, plain).inputs.values == make_plain_batch(d.train, ids).values);

  const std::vector<Assignment> mixed{{0, 7}, {1, 2}, {2, 7}};
  const auto a = make_permuted_batch(d.train, perms, mixed);
  CHECK(a.labels == std::vector<std::size_t>{7, 2, 7});
  CHECK(a.inputs.values == make_permuted_batch(d.train, perms, mixed).inputs.values);

  // Output part j is the normalized input part perm[j].
  const auto single = make_plain_batch(d.train, std::vector<std::size_t>{1});
  for (std::size_t j = 0; j < 4; ++j) CHECK(a.inputs.part(1, j) == single.part(0, perms[2][j]));

  nn::Rng r1(9), r2(9);
  const auto j1 = make_permuted_batch(d.train, perms, mixed, kDefaultJitter, &r1);
  const auto j2 = make_permuted_batch(d.train, perms, mixed, kDefaultJitter, &r2);
  CHECK(j1.inputs.values == j2.inputs.values);
  CHECK(j1.inputs.values != a.inputs.values);

  const std::vector<Assignment> bad_sample{{100000, 0}};
  const std::vector<Assignment> bad_perm{{0, 24}};
  CHECK_THROWS_AS(make_permuted_batch(d.train, perms, bad_sample), InvalidInput);
  CHECK_THROWS_AS(make_permuted_batch(d.train, perms, bad_perm), InvalidInput);
}

TEST_CASE("dataset files round trip and report corruption") {
  const auto d = gen_temporal_dataset(small_spec(Kind::kTemporal));
  const auto path = temp_file("data.bin");
  save_dataset(d, path);
  CHECK(load_dataset(path) == d);

  const std::string bytes = read_all(path);
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes.substr(0, bytes.size() - 10);
  }
  try {
    load_dataset(path);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected") != std::string::npos);
  }

  std::string mismatched = bytes;
  const auto at = mismatched.find("\"parts\":4");
  REQUIRE(at != std::string::npos);
  mismatched.replace(at, 9, "\"parts\":5");
  {
    std::ofstream out(path, std::ios::binary);
    out << mismatched;
  }
  CHECK_THROWS_AS(load_dataset(path), ValidationError);

  {
    std::ofstream out(path, std::ios::binary);
    out << "{not json\n";
  }
  CHECK_THROWS_AS(load_dataset(path), ParseError);
}
