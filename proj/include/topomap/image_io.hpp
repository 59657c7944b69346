#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "topomap/render.hpp"

namespace topomap {

std::vector<std::uint8_t> encode_png(const RgbImage& image);
void write_png(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_png(const std::filesystem::path& path);

/// Draws text with a built-in 3x5 pixel font scaled by `scale`. Lowercase
/// letters render as uppercase; unsupported characters render as '?'.
void draw_text(RgbImage& image, int x, int y, const std::string& text, int scale = 2, Rgb color = {0, 0, 0});
int text_width(const std::string& text, int scale = 2);

void write_svg(const std::filesystem::path& path, const Figure& figure, const std::vector<RgbImage>& panel_images);

}  // namespace topomap
