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

#include "layoutcorr/render.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "layoutcorr/metrics.hpp"

namespace layoutcorr {

namespace {

constexpr const char* kPalette[] = {"#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4",
                                    "#46f0f0", "#f032e6", "#bcf60c", "#008080", "#9a6324"};
constexpr int kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

const char* category_color(int c) { return kPalette[((c % kPaletteSize) + kPaletteSize) % kPaletteSize]; }

std::string layout_to_svg(const Layout& layout, const Vocabulary& vocab, const std::string& provenance) {
  std::string out;
  if (!provenance.empty()) out += "<!-- " + provenance + " -->\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kSvgWidth) + "\" height=\"" +
         std::to_string(kSvgHeight) + "\" viewBox=\"0 0 " + std::to_string(kSvgWidth) + " " +
         std::to_string(kSvgHeight) + "\">\n";
  out += "  <rect x=\"0\" y=\"0\" width=\"" + std::to_string(kSvgWidth) + "\" height=\"" +
         std::to_string(kSvgHeight) + "\" fill=\"#ffffff\" stroke=\"#000000\"/>\n";
  for (const Element& e : layout.elements) {
    const Rect r = element_rect(e, vocab);
    const char* color = category_color(e.c);
    out += "  <rect x=\"" + num(r.left * kSvgWidth) + "\" y=\"" + num(r.top * kSvgHeight) + "\" width=\"" +
           num((r.right - r.left) * kSvgWidth) + "\" height=\"" + num((r.bottom - r.top) * kSvgHeight) +
           "\" fill=\"" + color + "\" fill-opacity=\"0.4\" stroke=\"" + color + "\" data-category=\"" +
           std::to_string(e.c) + "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

std::vector<std::string> render_layouts(const std::vector<Layout>& layouts, const Vocabulary& vocab,
                                        const std::string& dir, const std::string& prefix,
                                        const std::string& provenance) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIo, "cannot create '" + dir + "': " + ec.message());
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%05zu.svg", prefix.c_str(), i);
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(Errc::kIo, "cannot write '" + path + "'");
    f << layout_to_svg(layouts[i], vocab, provenance);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace layoutcorr
