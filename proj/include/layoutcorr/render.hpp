// Copyright 2026 The layoutcorr Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// SVG rendering of layouts on a 400x600 canvas.

#include <string>
#include <vector>

#include "layoutcorr/vocab.hpp"

namespace layoutcorr {

inline constexpr int kSvgWidth = 400;
inline constexpr int kSvgHeight = 600;

// Fill colour for a category; cycles past the fixed palette.
const char* category_color(int c);

// `provenance` is written as a leading XML comment when non-empty.
std::string layout_to_svg(const Layout& layout, const Vocabulary& vocab, const std::string& provenance = "");

// Writes dir/<prefix>_00000.svg, ... Returns the paths written.
std::vector<std::string> render_layouts(const std::vector<Layout>& layouts, const Vocabulary& vocab,
                                        const std::string& dir, const std::string& prefix = "layout",
                                        const std::string& provenance = "");

}  // namespace layoutcorr
