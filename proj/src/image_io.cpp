#include "topomap/image_io.hpp"

#include <png.h>

#include <array>
#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <map>
#include <memory>

#include "topomap/error.hpp"

namespace topomap {

namespace {

using Glyph = std::array<const char*, 5>;

const std::map<char, Glyph>& font() {
    static const std::map<char, Glyph> glyphs = {
        {'0', {"###", "#.#", "#.#", "#.#", "###"}}, {'1', {".#.", "##.", ".#.", ".#.", "###"}},
        {'2', {"###", "..#", "###", "#..", "###"}}, {'3', {"###", "..#", ".##", "..#", "###"}},
        {'4', {"#.#", "#.#", "###", "..#", "..#"}}, {'5', {"###", "#..", "###", "..#", "###"}},
        {'6', {"###", "#..", "###", "#.#", "###"}}, {'7', {"###", "..#", "..#", ".#.", ".#."}},
        {'8', {"###", "#.#", "###", "#.#", "###"}}, {'9', {"###", "#.#", "###", "..#", "###"}},
        {'A', {".#.", "#.#", "###", "#.#", "#.#"}}, {'B', {"##.", "#.#", "##.", "#.#", "##."}},
        {'C', {".##", "#..", "#..", "#..", ".##"}}, {'D', {"##.", "#.#", "#.#", "#.#", "##."}},
        {'E', {"###", "#..", "##.", "#..", "###"}}, {'F', {"###", "#..", "##.", "#..", "#.."}},
        {'G', {".##", "#..", "#.#", "#.#", ".##"}}, {'H', {"#.#", "#.#", "###", "#.#", "#.#"}},
        {'I', {"###", ".#.", ".#.", ".#.", "###"}}, {'J', {"..#", "..#", "..#", "#.#", ".#."}},
        {'K', {"#.#", "#.#", "##.", "#.#", "#.#"}}, {'L', {"#..", "#..", "#..", "#..", "###"}},
        {'M', {"#.#", "###", "###", "#.#", "#.#"}}, {'N', {"##.", "#.#", "#.#", "#.#", "#.#"}},
        {'O', {".#.", "#.#", "#.#", "#.#", ".#."}}, {'P', {"##.", "#.#", "##.", "#..", "#.."}},
        {'Q', {".#.", "#.#", "#.#", "##.", ".##"}}, {'R', {"##.", "#.#", "##.", "#.#", "#.#"}},
        {'S', {".##", "#..", ".#.", "..#", "##."}}, {'T', {"###", ".#.", ".#.", ".#.", ".#."}},
        {'U', {"#.#", "#.#", "#.#", "#.#", "###"}}, {'V', {"#.#", "#.#", "#.#", "#.#", ".#."}},
        {'W', {"#.#", "#.#", "###", "###", "#.#"}}, {'X', {"#.#", "#.#", ".#.", "#.#", "#.#"}},
        {'Y', {"#.#", "#.#", ".#.", ".#.", ".#."}}, {'Z', {"###", "..#", ".#.", "#..", "###"}},
        {' ', {"...", "...", "...", "...", "..."}}, {'-', {"...", "...", "###", "...", "..."}},
        {'_', {"...", "...", "...", "...", "###"}}, {'>', {"#..", ".#.", "..#", ".#.", "#.."}},
        {'<', {"..#", ".#.", "#..", ".#.", "..#"}}, {'.', {"...", "...", "...", "...", ".#."}},
        {':', {"...", ".#.", "...", ".#.", "..."}}, {'/', {"..#", "..#", ".#.", "#..", "#.."}},
        {'(', {".#.", "#..", "#..", "#..", ".#."}}, {')', {".#.", "..#", "..#", "..#", ".#."}},
        {'?', {"###", "..#", ".#.", "...", ".#."}}, {'+', {"...", ".#.", "###", ".#.", "..."}},
        {'=', {"...", "###", "...", "###", "..."}},
    };
    return glyphs;
}

/// ASCII rendering of a UTF-8 caption: arrows become '>', other non-ASCII '?'.
std::string printable(const std::string& text) {
    std::string out;
    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c < 0x80) {
            out += static_cast<char>(std::toupper(c));
            ++i;
            continue;
        }
        if (text.compare(i, 3, "→") == 0) {
            out += '>';
            i += 3;
            continue;
        }
        std::size_t len = (c >= 0xF0) ? 4 : (c >= 0xE0) ? 3 : (c >= 0xC0) ? 2 : 1;
        out += '?';
        i += len;
    }
    return out;
}

struct PngWriteState {
    std::vector<std::uint8_t>* out;
};

void png_write_to_vector(png_structp png, png_bytep data, png_size_t length) {
    auto* state = static_cast<PngWriteState*>(png_get_io_ptr(png));
    state->out->insert(state->out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

// libpng reports errors by longjmp; these frames hold no objects with
// destructors so the jump is safe.
bool encode_impl(const RgbImage& image, PngWriteState* state) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, info ? &info : nullptr);
        return false;
    }
    png_set_write_fn(png, state, png_write_to_vector, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height; ++y)
        png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

bool read_impl(FILE* file, RgbImage* image) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        return false;
    }
    png_init_io(png, file);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);
    image->width = static_cast<int>(png_get_image_width(png, info));
    image->height = static_cast<int>(png_get_image_height(png, info));
    image->pixels.resize(static_cast<std::size_t>(image->width) * image->height * 3);
    for (int y = 0; y < image->height; ++y)
        png_read_row(png, image->pixels.data() + static_cast<std::size_t>(y) * image->width * 3, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

std::string base64(const std::vector<std::uint8_t>& bytes) {
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::vector<std::uint8_t>::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const RgbImage& image) {
    if (image.width <= 0 || image.height <= 0) throw Error("cannot encode an empty image");
    std::vector<std::uint8_t> out;
    PngWriteState state{&out};
    if (!encode_impl(image, &state)) throw Error("libpng failed to encode image");
    return out;
}

void write_png(const std::filesystem::path& path, const RgbImage& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing " + path.string());
}

RgbImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw Error("cannot open " + path.string());
    RgbImage image;
    if (!read_impl(file.get(), &image)) throw Error("cannot decode PNG " + path.string());
    return image;
}

int text_width(const std::string& text, int scale) {
    return static_cast<int>(printable(text).size()) * 4 * scale;
}

void draw_text(RgbImage& image, int x, int y, const std::string& text, int scale, Rgb color) {
    const auto& glyphs = font();
    int cursor = x;
    for (char c : printable(text)) {
        auto it = glyphs.find(c);
        const Glyph& g = it != glyphs.end() ? it->second : glyphs.at('?');
        for (int row = 0; row < 5; ++row)
            for (int col = 0; col < 3; ++col)
                if (g[static_cast<std::size_t>(row)][col] == '#')
                    for (int dy = 0; dy < scale; ++dy)
                        for (int dx = 0; dx < scale; ++dx)
                            image.set(cursor + col * scale + dx, y + row * scale + dy, color);
        cursor += 4 * scale;
    }
}

void write_svg(const std::filesystem::path& path, const Figure& figure, const std::vector<RgbImage>& panel_images) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    const int r = figure.resolution;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << figure.image.width << "\" height=\""
        << figure.image.height << "\">\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (std::size_t i = 0; i < figure.panels.size(); ++i) {
        const Panel& p = figure.panels[i];
        if (!p.group) continue;
        out << "  <image x=\"" << p.x << "\" y=\"" << p.y << "\" width=\"" << r << "\" height=\"" << r
            << "\" href=\"data:image/png;base64," << base64(encode_png(panel_images.at(i))) << "\"/>\n";
        out << "  <text x=\"" << p.x + r / 2 << "\" y=\"" << p.y + r + 12
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << xml_escape(p.caption)
            << "</text>\n";
    }
    out << "</svg>\n";
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace topomap
