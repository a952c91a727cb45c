#include <cstring>
#include <fstream>

#include "ccml/error.hpp"
#include "ccml/models/checkpoint.hpp"
#include "ccml/util/hash.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace ccml;
using namespace ccml::models;

namespace {

std::vector<std::string> vocab(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("tag" + std::to_string(i));
  return v;
}

ModelCheckpoint sample(Arch a, std::size_t tags = 8) {
  const auto c = ModelConfig::desk(a, tags, {1.5, 91});
  auto m = build_model<float>(c, 3);
  return capture(*m, vocab(tags), {"fma", 12, "", "exp-1"});
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("checkpoint: save/load is bitwise lossless for every architecture") {
  const auto dir = testing::scratch_dir("ckpt-roundtrip");
  for (Arch a : {Arch::VggIsh, Arch::Musicnn, Arch::Ast}) {
    const auto ck = sample(a);
    save_checkpoint(ck, dir / "m.ckpt");
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(back.config == ck.config);
    CHECK(back.vocabulary == ck.vocabulary);
    CHECK(back.provenance == ck.provenance);
    REQUIRE(back.tensors.size() == ck.tensors.size());
    for (std::size_t i = 0; i < ck.tensors.size(); ++i) {
      CHECK(back.tensors[i].name == ck.tensors[i].name);
      CHECK(std::memcmp(back.tensors[i].data.data(), ck.tensors[i].data.data(), ck.tensors[i].data.size() * 4) == 0);
    }
    // Instantiated model reproduces the original outputs exactly.
    auto m1 = instantiate<float>(ck);
    auto m2 = instantiate<float>(back);
    nn::NoGradGuard g;
    const auto x = nn::Tensor<float>::full({2, 1, 128, 91}, 0.25f);
    CHECK(m1->forward(x).values() == m2->forward(x).values());
  }
}

TEST_CASE("checkpoint: layout is magic, version, header length, JSON, float data") {
  const auto ck = sample(Arch::VggIsh);
  const auto bytes = serialize_checkpoint(ck);
  CHECK(std::memcmp(bytes.data(), "CCML", 4) == 0);
  CHECK(bytes[4] == kCheckpointVersion);
  const std::uint32_t hlen = bytes[8] | bytes[9] << 8 | bytes[10] << 16 | bytes[11] << 24;
  const auto header = Json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  CHECK(header["tensors"][0]["name"] == "conv1.weight");
  CHECK(header["tensors"][0]["offset"] == 0);
  std::size_t floats = 0;
  for (const auto& t : ck.tensors) floats += t.data.size();
  CHECK(bytes.size() == 12 + hlen + 4 * floats);
  float first;
  std::memcpy(&first, bytes.data() + 12 + hlen, 4);
  CHECK(first == ck.tensors[0].data[0]);
  // Content hash is the git blob id of the data section.
  CHECK(ck.provenance.content_hash ==
        git_blob_hash(std::span<const std::uint8_t>(bytes.data() + 12 + hlen, 4 * floats)));
  CHECK(serialize_checkpoint(ck) == bytes);
}

TEST_CASE("checkpoint: truncation and corruption raise CheckpointError naming the field") {
  const auto dir = testing::scratch_dir("ckpt-corrupt");
  const auto bytes = serialize_checkpoint(sample(Arch::Musicnn));

  auto expect = [&](std::vector<std::uint8_t> b, const char* field) {
    write_bytes(dir / "bad.ckpt", b);
    CHECK_THROWS_WITH_AS(load_checkpoint(dir / "bad.ckpt"), doctest::Contains(field), CheckpointError);
  };
  expect(std::vector<std::uint8_t>(bytes.begin(), bytes.end() - 7), "tensors[");
  expect(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 40), "header_length");
  expect(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 6), "magic");
  auto b = bytes;
  b[0] = 'X';
  expect(b, "magic");
  b = bytes;
  b[4] = 9;
  expect(b, "version");
  b = bytes;
  b.back() ^= 0x40;
  expect(b, "content_hash");
  CHECK_THROWS_WITH_AS(load_checkpoint(dir / "missing.ckpt"), doctest::Contains("file"), CheckpointError);
}

TEST_CASE("checkpoint: manifest is verified against the config") {
  auto ck = sample(Arch::Ast);
  auto bad = ck;
  bad.tensors[3].shape = nn::Shape{bad.tensors[3].data.size()};
  CHECK_THROWS_WITH_AS(serialize_checkpoint(bad), doctest::Contains(".shape"), CheckpointError);
  bad = ck;
  bad.tensors.pop_back();
  CHECK_THROWS_AS(serialize_checkpoint(bad), CheckpointError);
  bad = ck;
  bad.vocabulary.pop_back();
  CHECK_THROWS_WITH_AS(serialize_checkpoint(bad), doctest::Contains("vocabulary"), CheckpointError);
  bad = ck;
  std::swap(bad.tensors[1], bad.tensors[2]);
  CHECK_THROWS_WITH_AS(serialize_checkpoint(bad), doctest::Contains(".name"), CheckpointError);
}

TEST_CASE("checkpoint: a 50-tag source imports into a 30-tag target except the output layer") {
  const auto src = sample(Arch::VggIsh, 50);
  const auto tcfg = ModelConfig::desk(Arch::VggIsh, 30, {1.5, 91});
  auto target = build_model<float>(tcfg, 99);
  const auto head_before = target->params()["fc2.weight"].values();
  CHECK_THROWS_AS(import_weights(*target, src), CheckpointError);  // fc2 shapes differ
  const auto written =
      import_weights(*target, src, [](const std::string& n) { return !is_output_layer(Arch::VggIsh, n); });
  CHECK(written.size() == src.tensors.size() - 2);
  CHECK(target->params()["conv3.weight"].values() == src.tensor("conv3.weight").data);
  CHECK(target->params()["fc2.weight"].values() == head_before);
}

TEST_CASE("checkpoint: import hook with renaming for externally converted weights") {
  const auto src = sample(Arch::Ast);
  auto m = build_model<double>(src.config, 1);
  const auto written = import_weights(
      *m, src, [](const std::string& n) { return n.rfind("blocks.0.", 0) == 0; },
      [](const std::string& n) { return "blocks.1." + n.substr(9); });
  CHECK(written.size() == 16);
  const auto& w = m->params()["blocks.1.attn.q.weight"].values();
  const auto& s = src.tensor("blocks.0.attn.q.weight").data;
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(w[i] == static_cast<double>(s[i]));
}
