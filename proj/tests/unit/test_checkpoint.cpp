#include <doctest.h>

#include <fstream>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "protoaudio/checkpoint.hpp"
#include "protoaudio/error.hpp"

using namespace protoaudio;

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto dir = oracle::fresh_dir("ckpt");
  SplitMix64 gen(8);
  ParamSet params;
  params.add("block0.weight", gradcheck::random_tensor({4, 1, 3, 3}, gen));
  params.add("block0.bias", gradcheck::random_tensor({4}, gen));
  params.add("scalar", ad::Tensor::scalar(-0.0));
  save_checkpoint(dir / "p.psht", params);
  const ParamSet back = load_checkpoint(dir / "p.psht");
  CHECK(back.identical(params));
  CHECK(back.entries()[1].name == "block0.bias");

  std::ifstream in(dir / "p.psht", std::ios::binary);
  char magic[4];
  in.read(magic, 4);
  CHECK(std::string(magic, 4) == "PSHT");
}

TEST_CASE("clone is independent") {
  ParamSet params;
  params.add("w", ad::Tensor::from({2}, {1.0, 2.0}));
  ParamSet copy = params.clone();
  copy.at("w").node()->data[0] = 5.0;
  CHECK(params.at("w").data()[0] == 1.0);
  CHECK_FALSE(copy.identical(params));
}

TEST_CASE("bad checkpoints are rejected") {
  const auto dir = oracle::fresh_dir("ckpt_bad");
  {
    std::ofstream out(dir / "bad.psht", std::ios::binary);
    out << "NOPE1234";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.psht"), Error);

  ParamSet params;
  params.add("w", ad::Tensor::from({3}, {1.0, 2.0, 3.0}));
  save_checkpoint(dir / "ok.psht", params);
  std::filesystem::resize_file(dir / "ok.psht", std::filesystem::file_size(dir / "ok.psht") - 4);
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.psht"), Error);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.psht"), Error);
  CHECK_THROWS_AS(params.add("w", ad::Tensor::scalar(1.0)), Error);
}
