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

#include "mmcae/architecture.hpp"

#include "mmcae/binary_io.hpp"

namespace mmcae {

using nn::LayerSpec;

namespace {

void conv_block(std::vector<LayerSpec>& v, Index k, Index s, Index in, Index out) {
  v.push_back(LayerSpec::conv1d(k, s, in, out));
  v.push_back(LayerSpec::relu());
  v.push_back(LayerSpec::maxpool1d(2));
}

// Transposed convolution first, then upsampling.
void deconv_block(std::vector<LayerSpec>& v, Index k, Index s, Index in, Index out) {
  v.push_back(LayerSpec::deconv1d(k, s, in, out));
  v.push_back(LayerSpec::relu());
  v.push_back(LayerSpec::unpool1d(2));
}

void fusion_layers(Architecture& a, Index encoder_width) {
  a.fusion = {LayerSpec::dense(2 * encoder_width, a.latent_dim), LayerSpec::relu(),
              LayerSpec::dense(a.latent_dim, a.latent_dim)};
}

}  // namespace

Architecture paper_architecture() {
  Architecture a;
  a.name = "paper";
  a.signal_length = 4800;
  a.latent_dim = 128;

  conv_block(a.encoder, 11, 1, 1, 10);
  conv_block(a.encoder, 6, 1, 10, 20);
  conv_block(a.encoder, 6, 1, 20, 40);
  conv_block(a.encoder, 6, 1, 40, 60);
  conv_block(a.encoder, 6, 1, 60, 80);
  conv_block(a.encoder, 6, 1, 80, 100);
  a.encoder.push_back(LayerSpec::conv1d(70, 1, 100, 128));
  a.encoder.push_back(LayerSpec::flatten());

  fusion_layers(a, 128);

  a.decoder.push_back(LayerSpec::reshape(128, 1));
  deconv_block(a.decoder, 70, 1, 128, 100);
  deconv_block(a.decoder, 6, 1, 100, 80);
  deconv_block(a.decoder, 6, 1, 80, 60);
  deconv_block(a.decoder, 6, 1, 60, 40);
  deconv_block(a.decoder, 6, 1, 40, 20);
  deconv_block(a.decoder, 6, 1, 20, 10);
  a.decoder.push_back(LayerSpec::deconv1d(11, 1, 10, 1));
  return a;
}

Architecture compact_architecture() {
  Architecture a;
  a.name = "compact";
  a.signal_length = 4800;
  a.latent_dim = 32;

  conv_block(a.encoder, 16, 8, 1, 8);    // 4800 -> 599 -> 299
  conv_block(a.encoder, 8, 4, 8, 16);    // 299 -> 73 -> 36
  conv_block(a.encoder, 6, 1, 16, 32);   // 36 -> 31 -> 15
  a.encoder.push_back(LayerSpec::conv1d(15, 1, 32, 32));
  a.encoder.push_back(LayerSpec::flatten());

  fusion_layers(a, 32);

  a.decoder.push_back(LayerSpec::reshape(32, 1));
  deconv_block(a.decoder, 15, 1, 32, 32);  // 1 -> 15 -> 30
  deconv_block(a.decoder, 7, 1, 32, 16);   // 30 -> 36 -> 72
  deconv_block(a.decoder, 15, 4, 16, 8);   // 72 -> 299 -> 598
  a.decoder.push_back(LayerSpec::deconv1d(24, 8, 8, 1));  // 598 -> 4800
  return a;
}

Architecture mini_architecture() {
  Architecture a;
  a.name = "mini";
  a.signal_length = 64;
  a.latent_dim = 4;

  conv_block(a.encoder, 5, 1, 1, 3);   // 64 -> 60 -> 30
  conv_block(a.encoder, 4, 1, 3, 4);   // 30 -> 27 -> 13
  a.encoder.push_back(LayerSpec::conv1d(13, 1, 4, 4));
  a.encoder.push_back(LayerSpec::flatten());

  fusion_layers(a, 4);

  a.decoder.push_back(LayerSpec::reshape(4, 1));
  deconv_block(a.decoder, 13, 1, 4, 4);  // 1 -> 13 -> 26
  deconv_block(a.decoder, 5, 1, 4, 3);   // 26 -> 30 -> 60
  a.decoder.push_back(LayerSpec::deconv1d(5, 1, 3, 1));  // 60 -> 64
  return a;
}

Architecture architecture_by_name(std::string_view name) {
  if (name == "paper") return paper_architecture();
  if (name == "compact") return compact_architecture();
  if (name == "mini") return mini_architecture();
  throw Error("unknown architecture '" + std::string(name) + "' (expected paper, compact or mini)");
}

std::string describe(const Architecture& arch) {
  std::string s = arch.name + ";L=" + std::to_string(arch.signal_length) + ";d=" + std::to_string(arch.latent_dim);
  auto chain = [&](const char* tag, const std::vector<LayerSpec>& layers) {
    s += ";";
    s += tag;
    s += ":";
    for (const auto& l : layers) s += l.describe() + ",";
  };
  chain("enc", arch.encoder);
  chain("fuse", arch.fusion);
  chain("dec", arch.decoder);
  return s;
}

std::uint64_t architecture_hash(const Architecture& arch) { return io::fnv1a64(describe(arch)); }

}  // namespace mmcae
