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

#pragma once

#include "mmcae/nn/layers.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mmcae {

/// Layer chains for one modality encoder, the fusion layer and one modality
/// decoder. Both modalities use the same chains with separate parameters.
struct Architecture {
  std::string name;
  Index signal_length = 0;
  Index latent_dim = 0;
  std::vector<nn::LayerSpec> encoder;
  std::vector<nn::LayerSpec> fusion;
  std::vector<nn::LayerSpec> decoder;
};

/// Full-size network: 4800-sample inputs, 128-wide latent, 7 conv blocks.
Architecture paper_architecture();

/// Same 4800-sample interface with strided early layers and a 32-wide latent;
/// trains at desk scale on one core.
Architecture compact_architecture();

/// 64-sample, 4-wide latent network for gradient checks and fast tests.
Architecture mini_architecture();

/// "paper" | "compact" | "mini".
Architecture architecture_by_name(std::string_view name);

/// Canonical text form of every layer; the checkpoint hash covers this.
std::string describe(const Architecture& arch);
std::uint64_t architecture_hash(const Architecture& arch);

}  // namespace mmcae
