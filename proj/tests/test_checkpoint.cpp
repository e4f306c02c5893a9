#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cyclehash/checkpoint.hpp"
#include "cyclehash/errors.hpp"

namespace cyclehash {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cyclehash_test_checkpoint";
  fs::create_directories(dir);
  return dir / name;
}

CrossModalModel model(std::uint64_t seed) {
  ArchitectureConfig arch;
  arch.bits = 8;
  arch.stem_u = {6};
  std::mt19937_64 rng(seed);
  return CrossModalModel::create(arch, 12, 5, rng);
}

TEST(Checkpoint, RoundTripIsLossless) {
  Checkpoint ckpt;
  ckpt.seed = 0xDEADBEEFCAFEull;
  ckpt.meta["note"] = "line one\nline two";
  store_model(ckpt, model(1));
  ckpt.blobs.push_back({"empty_history", {0, 5}, {}});
  const fs::path p = temp_file("round_trip.ckpt");
  write_checkpoint(p, ckpt);
  const Checkpoint back = read_checkpoint(p);
  EXPECT_EQ(back, ckpt);
  EXPECT_EQ(back.bits, 8u);
  EXPECT_EQ(back.dim_u, 12u);
  EXPECT_EQ(back.dim_v, 5u);
}

TEST(Checkpoint, LoadModelRestoresEveryParameter) {
  Checkpoint ckpt;
  const CrossModalModel src = model(1);
  store_model(ckpt, src);
  CrossModalModel dst = model(2);
  load_model(ckpt, dst);
  const auto a = src.named_parameters();
  const auto b = dst.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(std::equal(a[i].second.values().begin(), a[i].second.values().end(),
                           b[i].second.values().begin()))
        << a[i].first;
  }
}

TEST(Checkpoint, RejectsMismatchedArchitecture) {
  Checkpoint ckpt;
  store_model(ckpt, model(1));
  ArchitectureConfig arch;
  arch.bits = 8;  // no stem: different parameter set
  std::mt19937_64 rng(0);
  CrossModalModel other = CrossModalModel::create(arch, 12, 5, rng);
  EXPECT_THROW(load_model(ckpt, other), FormatError);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  Checkpoint ckpt;
  store_model(ckpt, model(1));
  const fs::path p = temp_file("corrupt.ckpt");
  write_checkpoint(p, ckpt);
  const auto size = fs::file_size(p);

  fs::resize_file(p, size - 3);
  EXPECT_THROW(read_checkpoint(p), FormatError);

  write_checkpoint(p, ckpt);
  {
    std::ofstream f(p, std::ios::binary | std::ios::app);
    f << 'x';
  }
  EXPECT_THROW(read_checkpoint(p), FormatError);

  {
    std::ofstream f(p, std::ios::binary);
    f << "NOTACKPT";
  }
  EXPECT_THROW(read_checkpoint(p), FormatError);

  write_checkpoint(p, ckpt);
  {
    std::fstream f(p, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(8);
    const std::uint32_t bad_version = 99;
    f.write(reinterpret_cast<const char*>(&bad_version), 4);
  }
  EXPECT_THROW(read_checkpoint(p), FormatError);
  EXPECT_THROW(read_checkpoint(temp_file("missing.ckpt")), FormatError);
}

TEST(Checkpoint, RequireNamesTheMissingBlob) {
  Checkpoint ckpt;
  try {
    ckpt.require("u.encoder.W");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("u.encoder.W"), std::string::npos);
  }
}

}  // namespace
}  // namespace cyclehash
