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

#include "mmcae/model.hpp"

#include "mmcae/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

namespace mmcae {

std::string_view to_string(InputMode mode) {
  switch (mode) {
    case InputMode::Joint: return "joint";
    case InputMode::SingleA: return "single-a";
    case InputMode::SingleV: return "single-v";
  }
  return "unknown";
}

InputMode parse_input_mode(std::string_view text) {
  if (text == "joint" || text == "z") return InputMode::Joint;
  if (text == "a" || text == "single-a") return InputMode::SingleA;
  if (text == "v" || text == "single-v") return InputMode::SingleV;
  throw Error("unknown input mode '" + std::string(text) + "' (expected joint, a or v)");
}

MultiModalAE::MultiModalAE(Architecture arch)
    : arch_(std::move(arch)),
      encoder_a_("encoder_a", {1, arch_.signal_length}, arch_.encoder, params_),
      encoder_v_("encoder_v", {1, arch_.signal_length}, arch_.encoder, params_),
      fusion_("fusion", {2 * encoder_a_.output_shape().channels, 1}, arch_.fusion, params_),
      decoder_a_("decoder_a", {arch_.latent_dim, 1}, arch_.decoder, params_),
      decoder_v_("decoder_v", {arch_.latent_dim, 1}, arch_.decoder, params_) {
  auto fail = [](const std::string& what) { throw ShapeError("architecture '" + what); };
  if (encoder_a_.output_shape().length != 1) fail(arch_.name + "': encoder output must be flat");
  if (fusion_.output_shape() != Shape{arch_.latent_dim, 1})
    fail(arch_.name + "': fusion output " + to_string(fusion_.output_shape()) + " != latent_dim " +
         std::to_string(arch_.latent_dim));
  if (decoder_a_.output_shape() != Shape{1, arch_.signal_length})
    fail(arch_.name + "': decoder output " + to_string(decoder_a_.output_shape()) + " != signal length " +
         std::to_string(arch_.signal_length));
}

MultiModalAE MultiModalAE::init(const Architecture& arch, std::uint64_t seed) {
  MultiModalAE model(arch);
  Rng rng(seed);
  for (const nn::Stack* s : {&model.encoder_a_, &model.encoder_v_, &model.fusion_, &model.decoder_a_,
                             &model.decoder_v_})
    s->initialize(model.params_, rng);
  return model;
}

std::uint64_t MultiModalAE::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& b : params_) {
    h = io::fnv1a64(b.name, h);
    for (Index i = 0; i < b.value.size(); ++i) {
      const auto bits = std::bit_cast<std::uint64_t>(b.value.data()[i]);
      h = io::fnv1a64(std::string_view(reinterpret_cast<const char*>(&bits), sizeof(bits)), h);
    }
  }
  return h;
}

namespace {

SignalBatch run_encoder(const nn::Stack& stack, const nn::ParameterStore<double>& params, const SignalBatch& x,
                        Index batch, bool masked, nn::Trace<double>* trace) {
  const SignalBatch input = masked ? SignalBatch::zeros(1, stack.input_shape()) : x;
  if (!masked && x.size != batch) throw ShapeError("modality batches differ in size");
  auto tr = nn::forward(stack, params, input);
  SignalBatch out = tr.output();
  if (masked) out = SignalBatch::features(out.data.replicate(1, batch));
  if (trace != nullptr) *trace = std::move(tr);
  return out;
}

}  // namespace

MatrixXr encode_batch(const MultiModalAE& model, const SignalBatch& a, const SignalBatch& v, InputMode mode,
                      EncodeTrace* trace) {
  const bool mask_a = mode == InputMode::SingleV;
  const bool mask_v = mode == InputMode::SingleA;
  const Index n = mask_a ? v.size : a.size;
  if (n < 1) throw ShapeError("encode: empty batch");
  const Shape want{1, model.signal_length()};
  if (!mask_a && a.shape() != want)
    throw ShapeError("encode: modality A shape " + to_string(a.shape()) + " != " + to_string(want));
  if (!mask_v && v.shape() != want)
    throw ShapeError("encode: modality V shape " + to_string(v.shape()) + " != " + to_string(want));

  nn::Trace<double> ta, tv;
  const SignalBatch ea = run_encoder(model.encoder_a(), model.params(), a, n, mask_a, &ta);
  const SignalBatch ev = run_encoder(model.encoder_v(), model.params(), v, n, mask_v, &tv);

  // Fixed concatenation order: modality A features, then modality V.
  SignalBatch fused(n, ea.channels + ev.channels, 1);
  fused.data.topRows(ea.channels) = ea.data;
  fused.data.bottomRows(ev.channels) = ev.data;
  auto tf = nn::forward(model.fusion(), model.params(), fused);
  MatrixXr latent = tf.output().data;
  if (trace != nullptr) {
    trace->mode = mode;
    trace->batch = n;
    trace->encoder_a = std::move(ta);
    trace->encoder_v = std::move(tv);
    trace->fusion = std::move(tf);
  }
  return latent;
}

void encode_backward(MultiModalAE& model, const EncodeTrace& trace, const MatrixXr& latent_grad) {
  auto& params = model.params();
  const SignalBatch g_fused =
      nn::backward(model.fusion(), params, trace.fusion, SignalBatch::features(latent_grad), true);
  const Index wa = trace.encoder_a.output().channels;
  const Index wv = trace.encoder_v.output().channels;

  auto branch = [&](const nn::Stack& stack, const nn::Trace<double>& tr, MatrixXr g) {
    // Masked branch ran once and was broadcast: its gradient is the sum.
    if (tr.output().size == 1 && trace.batch != 1) g = g.rowwise().sum().eval();
    nn::backward(stack, params, tr, SignalBatch::features(std::move(g)), false);
  };
  branch(model.encoder_a(), trace.encoder_a, g_fused.data.topRows(wa));
  branch(model.encoder_v(), trace.encoder_v, g_fused.data.bottomRows(wv));
}

std::pair<SignalBatch, SignalBatch> decode_batch(const MultiModalAE& model, const MatrixXr& latent,
                                                 DecodeTrace* trace) {
  if (latent.rows() != model.latent_dim())
    throw ShapeError("decode: latent width " + std::to_string(latent.rows()) + " != " +
                     std::to_string(model.latent_dim()));
  const SignalBatch h = SignalBatch::features(latent);
  auto ta = nn::forward(model.decoder_a(), model.params(), h);
  auto tv = nn::forward(model.decoder_v(), model.params(), h);
  std::pair<SignalBatch, SignalBatch> out{ta.output(), tv.output()};
  if (trace != nullptr) {
    trace->decoder_a = std::move(ta);
    trace->decoder_v = std::move(tv);
  }
  return out;
}

MatrixXr decode_backward(MultiModalAE& model, const DecodeTrace& trace, const SignalBatch& grad_a,
                         const SignalBatch& grad_v) {
  auto& params = model.params();
  MatrixXr g = nn::backward(model.decoder_a(), params, trace.decoder_a, grad_a, true).data;
  g += nn::backward(model.decoder_v(), params, trace.decoder_v, grad_v, true).data;
  return g;
}

namespace {

SignalBatch pack(std::span<const MultiModalSample> samples, bool acoustic) {
  if (samples.empty()) return {};
  const Index len = acoustic ? samples[0].acoustic.size() : samples[0].vibration.size();
  SignalBatch b(static_cast<Index>(samples.size()), 1, len);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const VectorXr& s = acoustic ? samples[i].acoustic : samples[i].vibration;
    if (s.size() != len)
      throw ShapeError("sample '" + samples[i].id + "' has signal length " + std::to_string(s.size()) +
                       ", expected " + std::to_string(len));
    b.data.block(0, static_cast<Index>(i) * len, 1, len) = s.transpose();
  }
  return b;
}

// Bounds activation memory for the full-size network.
constexpr std::size_t kInferenceChunk = 64;

}  // namespace

SignalBatch acoustic_batch(std::span<const MultiModalSample> samples) { return pack(samples, true); }
SignalBatch vibration_batch(std::span<const MultiModalSample> samples) { return pack(samples, false); }

LatentBatch encode(const MultiModalAE& model, std::span<const MultiModalSample> samples, InputMode mode) {
  LatentBatch out;
  out.mode = mode;
  out.values.resize(static_cast<Index>(samples.size()), model.latent_dim());
  for (const auto& s : samples) out.labels.push_back(s.label);
  for (std::size_t start = 0; start < samples.size(); start += kInferenceChunk) {
    const auto chunk = samples.subspan(start, std::min(kInferenceChunk, samples.size() - start));
    const SignalBatch a = mode == InputMode::SingleV ? SignalBatch(static_cast<Index>(chunk.size()), 1, 0)
                                                     : acoustic_batch(chunk);
    const SignalBatch v = mode == InputMode::SingleA ? SignalBatch(static_cast<Index>(chunk.size()), 1, 0)
                                                     : vibration_batch(chunk);
    out.values.middleRows(static_cast<Index>(start), static_cast<Index>(chunk.size())) =
        encode_batch(model, a, v, mode).transpose();
  }
  return out;
}

Reconstruction decode(const MultiModalAE& model, const LatentBatch& latent) {
  if (latent.values.cols() != model.latent_dim())
    throw ShapeError("decode: latent width " + std::to_string(latent.values.cols()) + " != " +
                     std::to_string(model.latent_dim()));
  const Index n = latent.values.rows();
  const Index len = model.signal_length();
  Reconstruction r{MatrixXr(n, len), MatrixXr(n, len)};
  for (Index start = 0; start < n; start += static_cast<Index>(kInferenceChunk)) {
    const Index m = std::min<Index>(static_cast<Index>(kInferenceChunk), n - start);
    const auto [ra, rv] = decode_batch(model, latent.values.middleRows(start, m).transpose());
    for (Index i = 0; i < m; ++i) {
      r.acoustic.row(start + i) = ra.sample(i);
      r.vibration.row(start + i) = rv.sample(i);
    }
  }
  return r;
}

void save_checkpoint(const MultiModalAE& model, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::put_le(os, kCheckpointVersion);
  io::put_le(os, architecture_hash(model.arch()));
  io::put_le(os, static_cast<std::uint32_t>(model.latent_dim()));
  io::put_le(os, static_cast<std::uint32_t>(model.signal_length()));
  io::put_string(os, model.arch().name);
  io::put_le(os, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& b : model.params()) {
    io::put_string(os, b.name);
    io::put_le(os, static_cast<std::uint32_t>(b.value.rows()));
    io::put_le(os, static_cast<std::uint32_t>(b.value.cols()));
    for (Index i = 0; i < b.value.size(); ++i) io::put_f64(os, b.value.data()[i]);
  }
  if (!os) throw Error("failed writing checkpoint: " + path.string());
}

MultiModalAE load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!is.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic))
    throw io::FormatError("not a model checkpoint: " + path.string());
  const auto version = io::get_le<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw io::FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto hash = io::get_le<std::uint64_t>(is);
  const auto latent = io::get_le<std::uint32_t>(is);
  const auto length = io::get_le<std::uint32_t>(is);
  const std::string arch_name = io::get_string(is);
  MultiModalAE model(architecture_by_name(arch_name));
  if (architecture_hash(model.arch()) != hash || model.latent_dim() != latent || model.signal_length() != length)
    throw io::FormatError("checkpoint architecture does not match preset '" + arch_name + "'");
  const auto blocks = io::get_le<std::uint32_t>(is);
  if (blocks != model.params().size()) throw io::FormatError("checkpoint parameter block count mismatch");
  for (auto& b : model.params()) {
    const std::string name = io::get_string(is);
    const auto rows = io::get_le<std::uint32_t>(is);
    const auto cols = io::get_le<std::uint32_t>(is);
    if (name != b.name || rows != b.value.rows() || cols != b.value.cols())
      throw io::FormatError("checkpoint block '" + name + "' does not match model block '" + b.name + "'");
    for (Index i = 0; i < b.value.size(); ++i) b.value.data()[i] = io::get_f64(is);
  }
  model.params().touch();
  return model;
}

}  // namespace mmcae
