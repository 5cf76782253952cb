/*
 * Copyright 2026 The mmcae Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <doctest.h>

#include "mmcae/binary_io.hpp"
#include "mmcae/model.hpp"
#include "shapes_oracle.hpp"

#include <filesystem>
#include <fstream>

using namespace mmcae;

namespace {

std::vector<MultiModalSample> random_samples(Index n, Index len, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MultiModalSample> out;
  for (Index i = 0; i < n; ++i) {
    MultiModalSample s;
    s.id = "s" + std::to_string(i);
    s.acoustic = VectorXr::NullaryExpr(len, [&] { return rng.normal(); });
    s.vibration = VectorXr::NullaryExpr(len, [&] { return rng.normal(); });
    s.label = static_cast<int>(i % 3);
    out.push_back(std::move(s));
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("mmcae_test_" + name);
}

}  // namespace

TEST_CASE("full-size architecture reproduces every encoder/decoder/fusion size cell") {
  const MultiModalAE model(paper_architecture());
  const auto check = testing::check_table_shapes(model);
  for (const auto& m : check.mismatches) FAIL_CHECK(m);
  CHECK(check.cells == 4 * 16 + 3);
}

TEST_CASE("full-size parameter count matches the per-layer sum from the layer tables") {
  const MultiModalAE model(paper_architecture());
  CHECK(model.params().total_parameters() == testing::table_parameter_count());
  CHECK(model.encoder_a().parameter_count() + model.encoder_v().parameter_count() + model.fusion().parameter_count() +
            model.decoder_a().parameter_count() + model.decoder_v().parameter_count() ==
        testing::table_parameter_count());
}

TEST_CASE("init is deterministic per seed") {
  const auto a = MultiModalAE::init(mini_architecture(), 7);
  const auto b = MultiModalAE::init(mini_architecture(), 7);
  const auto c = MultiModalAE::init(mini_architecture(), 8);
  CHECK(a.parameter_hash() == b.parameter_hash());
  CHECK(a.parameter_hash() != c.parameter_hash());
  for (Index i = 0; i < a.params().size(); ++i)
    CHECK((a.params()[i].value.array() == b.params()[i].value.array()).all());
}

TEST_CASE("mini and compact presets are self-consistent") {
  const MultiModalAE mini(mini_architecture());
  CHECK(mini.signal_length() == 64);
  CHECK(mini.latent_dim() == 4);
  CHECK(mini.params().total_parameters() < 10000);
  const MultiModalAE compact(compact_architecture());
  CHECK(compact.signal_length() == 4800);
  CHECK(compact.decoder_a().output_shape() == Shape{1, 4800});
}

TEST_CASE("inconsistent architecture is rejected with the violating layer") {
  Architecture arch = mini_architecture();
  arch.signal_length = 65;
  CHECK_THROWS_AS(MultiModalAE{arch}, ShapeError);
  arch = mini_architecture();
  arch.encoder[3] = nn::LayerSpec::conv1d(4, 1, 5, 4);
  try {
    MultiModalAE m(arch);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("encoder_a layer 3") != std::string::npos);
  }
}

TEST_CASE("full-size joint encode gives a 128-wide latent and decodes to two 4800 signals") {
  const auto model = MultiModalAE::init(paper_architecture(), 1);
  const auto samples = random_samples(1, 4800, 2);
  const LatentBatch h = encode(model, samples, InputMode::Joint);
  CHECK(h.values.rows() == 1);
  CHECK(h.values.cols() == 128);
  const Reconstruction r = decode(model, h);
  CHECK(r.acoustic.rows() == 1);
  CHECK(r.acoustic.cols() == 4800);
  CHECK(r.vibration.cols() == 4800);
}

TEST_CASE("single-modal encode with an all-zero present modality equals joint on two zero signals") {
  const auto model = MultiModalAE::init(mini_architecture(), 3);
  auto samples = random_samples(1, 64, 4);
  samples[0].acoustic.setZero();
  auto zeros = samples;
  zeros[0].vibration.setZero();
  const auto single = encode(model, samples, InputMode::SingleA).values;
  const auto joint = encode(model, zeros, InputMode::Joint).values;
  CHECK((single.array() == joint.array()).all());
}

TEST_CASE("single-modal latent differs from joint when the masked encoder output changes") {
  const auto model = MultiModalAE::init(mini_architecture(), 5);
  const auto samples = random_samples(4, 64, 6);
  const auto joint = encode(model, samples, InputMode::Joint).values;
  const auto single = encode(model, samples, InputMode::SingleA).values;

  const SignalBatch v = vibration_batch(samples);
  const auto ev = nn::forward(model.encoder_v(), model.params(), v).output().data;
  const auto ev0 = nn::forward(model.encoder_v(), model.params(), SignalBatch(1, 1, 64)).output().data;
  for (Index i = 0; i < 4; ++i) {
    if ((ev.col(i) - ev0.col(0)).norm() > 0.0) CHECK((joint.row(i) - single.row(i)).norm() > 0.0);
  }
}

TEST_CASE("joint encode on samples with a zero modality matches the single-modal mode") {
  const auto model = MultiModalAE::init(mini_architecture(), 9);
  auto samples = random_samples(5, 64, 10);
  for (auto& s : samples) s.vibration.setZero();
  const auto joint = encode(model, samples, InputMode::Joint).values;
  const auto single = encode(model, samples, InputMode::SingleA).values;
  CHECK((joint - single).cwiseAbs().maxCoeff() < 1e-12);

  auto one = std::vector<MultiModalSample>{samples[0]};
  CHECK((encode(model, one, InputMode::Joint).values.array() == encode(model, one, InputMode::SingleA).values.array())
            .all());
}

TEST_CASE("single-modal A ignores modality V entirely") {
  const auto model = MultiModalAE::init(mini_architecture(), 11);
  auto samples = random_samples(3, 64, 12);
  const auto before = encode(model, samples, InputMode::SingleA).values;
  for (auto& s : samples) s.vibration *= -7.0;
  const auto after = encode(model, samples, InputMode::SingleA).values;
  CHECK((before.array() == after.array()).all());
  samples[0].vibration.resize(3);  // even a malformed V signal is never read
  CHECK_NOTHROW(encode(model, samples, InputMode::SingleA));
}

TEST_CASE("all modes share the fusion parameters and the final fusion layer is linear") {
  const auto arch = paper_architecture();
  REQUIRE(arch.fusion.size() == 3);
  CHECK(arch.fusion[0].kind == nn::LayerKind::Dense);
  CHECK(arch.fusion[1].kind == nn::LayerKind::Relu);
  CHECK(arch.fusion.back().kind == nn::LayerKind::Dense);
  const auto model = MultiModalAE::init(mini_architecture(), 13);
  const auto h = encode(model, random_samples(16, 64, 14), InputMode::Joint).values;
  CHECK(h.minCoeff() < 0.0);  // a ReLU output could not go negative
}

TEST_CASE("decode is deterministic and round-trips shapes") {
  const auto model = MultiModalAE::init(mini_architecture(), 15);
  const auto samples = random_samples(6, 64, 16);
  for (InputMode mode : kAllModes) {
    const auto h = encode(model, samples, mode);
    const auto r1 = decode(model, h);
    const auto r2 = decode(model, h);
    CHECK(r1.acoustic.rows() == 6);
    CHECK(r1.acoustic.cols() == 64);
    CHECK((r1.acoustic.array() == r2.acoustic.array()).all());
    CHECK((r1.vibration.array() == r2.vibration.array()).all());
  }
}

TEST_CASE("shape errors: signal length and latent width") {
  const auto model = MultiModalAE::init(mini_architecture(), 17);
  CHECK_THROWS_AS(encode(model, random_samples(2, 63, 1), InputMode::Joint), ShapeError);
  LatentBatch bad;
  bad.values = MatrixXr::Zero(2, 5);
  CHECK_THROWS_AS(decode(model, bad), ShapeError);
}

TEST_CASE("checkpoint round trip is bit-identical and guarded by magic and version") {
  const auto model = MultiModalAE::init(mini_architecture(), 19);
  const auto path = temp_path("ckpt.bin");
  save_checkpoint(model, path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.parameter_hash() == model.parameter_hash());
  CHECK(loaded.arch().name == "mini");

  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(8);
    io::put_le(f, std::uint32_t{99});
  }
  CHECK_THROWS_AS(load_checkpoint(path), io::FormatError);
  {
    std::ofstream f(path, std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), io::FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint header is little-endian and byte-stable") {
  const auto model = MultiModalAE::init(mini_architecture(), 21);
  const auto p1 = temp_path("ckpt_a.bin");
  const auto p2 = temp_path("ckpt_b.bin");
  save_checkpoint(model, p1);
  save_checkpoint(load_checkpoint(p1), p2);
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
  };
  const std::string a = slurp(p1);
  CHECK(a == slurp(p2));
  CHECK(a.substr(0, 8) == "MMCAECKP");
  CHECK(static_cast<unsigned char>(a[8]) == 1);  // version, low byte first
  CHECK(a[9] == 0);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}
