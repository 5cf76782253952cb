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

#include "mmcae/model.hpp"

#include <string>
#include <vector>

// Hand-transcribed layer tables of the full-size network. Each row is one
// table column: how many stack layers it spans, its input and output sizes,
// and (kernel, in, out) for its convolution if any.
namespace mmcae::testing {

struct TableRow {
  std::size_t span;
  Shape input;
  Shape output;
  Index kernel, in, out;
};

inline const std::vector<TableRow>& encoder_table() {
  static const std::vector<TableRow> t = {
      {3, {1, 4800}, {10, 2395}, 11, 1, 10},     {3, {10, 2395}, {20, 1195}, 6, 10, 20},
      {3, {20, 1195}, {40, 595}, 6, 20, 40},     {3, {40, 595}, {60, 295}, 6, 40, 60},
      {3, {60, 295}, {80, 145}, 6, 60, 80},      {3, {80, 145}, {100, 70}, 6, 80, 100},
      {1, {100, 70}, {128, 1}, 70, 100, 128},    {1, {128, 1}, {128, 1}, 0, 0, 0},
  };
  return t;
}

inline const std::vector<TableRow>& decoder_table() {
  static const std::vector<TableRow> t = {
      {1, {128, 1}, {128, 1}, 0, 0, 0},          {3, {128, 1}, {100, 140}, 70, 128, 100},
      {3, {100, 140}, {80, 290}, 6, 100, 80},    {3, {80, 290}, {60, 590}, 6, 80, 60},
      {3, {60, 590}, {40, 1190}, 6, 60, 40},     {3, {40, 1190}, {20, 2390}, 6, 40, 20},
      {3, {20, 2390}, {10, 4790}, 6, 20, 10},    {1, {10, 4790}, {1, 4800}, 11, 10, 1},
  };
  return t;
}

inline std::string describe_shape(Shape s) {
  return "(" + std::to_string(s.channels) + ", " + std::to_string(s.length) + ")";
}

// A flat (-1, F) tensor is carried as Shape{F, 1}. Appends one message per
// mismatching size cell; returns the number of cells compared.
inline std::size_t compare_rows(const nn::Stack& stack, const std::vector<TableRow>& table, const std::string& name,
                                std::vector<std::string>& mismatches) {
  const auto& shapes = stack.shapes();
  std::size_t at = 0, cells = 0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string where = name + " column " + std::to_string(r + 1);
    if (at + table[r].span >= shapes.size()) {
      mismatches.push_back(where + ": stack is too short");
      return cells;
    }
    if (shapes[at] != table[r].input)
      mismatches.push_back(where + " input " + describe_shape(shapes[at]) + ", table " + describe_shape(table[r].input));
    at += table[r].span;
    if (shapes[at] != table[r].output)
      mismatches.push_back(where + " output " + describe_shape(shapes[at]) + ", table " +
                           describe_shape(table[r].output));
    cells += 2;
  }
  if (at + 1 != shapes.size()) mismatches.push_back(name + ": stack has extra layers");
  return cells;
}

struct TableCheck {
  std::size_t cells = 0;
  std::vector<std::string> mismatches;
};

inline TableCheck check_table_shapes(const MultiModalAE& model) {
  TableCheck c;
  c.cells += compare_rows(model.encoder_a(), encoder_table(), "encoder A", c.mismatches);
  c.cells += compare_rows(model.encoder_v(), encoder_table(), "encoder V", c.mismatches);
  c.cells += compare_rows(model.decoder_a(), decoder_table(), "decoder A", c.mismatches);
  c.cells += compare_rows(model.decoder_v(), decoder_table(), "decoder V", c.mismatches);
  const std::pair<Shape, Shape> fusion[] = {{model.fusion().input_shape(), Shape{256, 1}},
                                            {model.fusion().shapes()[1], Shape{128, 1}},
                                            {model.fusion().output_shape(), Shape{128, 1}}};
  for (const auto& [got, want] : fusion) {
    if (got != want)
      c.mismatches.push_back("fusion " + describe_shape(got) + ", table " + describe_shape(want));
    ++c.cells;
  }
  return c;
}

inline Index table_parameter_count() {
  Index n = 0;
  for (const auto* t : {&encoder_table(), &decoder_table()})
    for (const auto& r : *t) n += 2 * (r.kernel * r.in * r.out + r.out);
  n += 256 * 128 + 128 + 128 * 128 + 128;
  return n;
}

}  // namespace mmcae::testing
