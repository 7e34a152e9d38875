#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hlab/errors.hpp"
#include "hlab/field_io.hpp"

using namespace hlab;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "hlab_io_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(FieldIo, RoundTripPreservesValuesAndHeader) {
  const TorusGrid g(3, 8, 1.5);
  const auto u = SpectralField::from_function(g, [](std::span<const double> x) { return cplx{x[0], x[1] * x[2]}; });
  const auto path = tmp("rt.bin");
  write_field(path, u);
  EXPECT_EQ(fs::file_size(path), 25u + 16u * g.size());
  FieldHeader h;
  const auto v = read_field(path, &h);
  EXPECT_EQ(h.dim, 3u);
  EXPECT_EQ(h.n, 8u);
  EXPECT_EQ(h.length, 1.5);
  EXPECT_EQ(h.flags & kFlagRealValued, 0u);
  ASSERT_TRUE(v.grid() == g);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(v.values()[i], u.values()[i]);
}

TEST(FieldIo, RealFlag) {
  const TorusGrid g(2, 4, 1.0);
  const auto u = SpectralField::from_function(g, [](std::span<const double> x) { return cplx{x[0], 0.0}; });
  const auto path = tmp("real.bin");
  write_field(path, u);
  FieldHeader h;
  (void)read_field(path, &h);
  EXPECT_EQ(h.flags & kFlagRealValued, kFlagRealValued);
}

TEST(FieldIo, BadMagicAndTruncation) {
  const auto path = tmp("bad.bin");
  {
    std::ofstream o(path, std::ios::binary);
    o << "NOPE!xxxxxxxxxxxxxxxxxxxxxxxxxxxxx";
  }
  EXPECT_THROW((void)read_field(path), IoError);
  const TorusGrid g(2, 4, 1.0);
  const auto good = tmp("trunc.bin");
  write_field(good, SpectralField(g));
  fs::resize_file(good, 40);
  EXPECT_THROW((void)read_field(good), IoError);
  EXPECT_THROW((void)read_field(tmp("missing.bin")), IoError);
}

TEST(FieldIo, SidecarJson) {
  const TorusGrid g(2, 4, 1.0);
  const auto path = tmp("side.bin");
  nlohmann::ordered_json j;
  j["seed"] = 42;
  write_field_with_sidecar(path, SpectralField(g), j);
  std::ifstream in(path.string() + ".json");
  ASSERT_TRUE(in);
  const auto back = nlohmann::json::parse(in);
  EXPECT_EQ(back["seed"], 42);
}
