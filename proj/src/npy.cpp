#include "topomap/npy.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "topomap/error.hpp"

static_assert(std::endian::native == std::endian::little, "NPY I/O assumes a little-endian host");

namespace topomap::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

struct Header {
    std::string descr;
    std::vector<std::size_t> shape;
    std::size_t data_offset = 0;
};

std::string read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string dict_value(const std::string& dict, const std::string& key) {
    auto pos = dict.find("'" + key + "'");
    if (pos == std::string::npos) throw Error("npy header missing key '" + key + "'");
    pos = dict.find(':', pos);
    if (pos == std::string::npos) throw Error("malformed npy header");
    ++pos;
    while (pos < dict.size() && dict[pos] == ' ') ++pos;
    if (dict[pos] == '\'') {
        auto end = dict.find('\'', pos + 1);
        return dict.substr(pos + 1, end - pos - 1);
    }
    if (dict[pos] == '(') {
        auto end = dict.find(')', pos);
        return dict.substr(pos, end - pos + 1);
    }
    auto end = dict.find_first_of(",}", pos);
    return dict.substr(pos, end - pos);
}

Header parse_header(const std::string& bytes, const std::filesystem::path& path) {
    if (bytes.size() < 10 || bytes.compare(0, 6, kMagic, 6) != 0)
        throw Error(path.string() + ": not an NPY file");
    const auto major = static_cast<unsigned char>(bytes[6]);
    std::size_t header_len = 0;
    std::size_t offset = 0;
    if (major == 1) {
        header_len = static_cast<unsigned char>(bytes[8]) |
                     (static_cast<std::size_t>(static_cast<unsigned char>(bytes[9])) << 8);
        offset = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw Error(path.string() + ": truncated NPY header");
        header_len = 0;
        for (int i = 0; i < 4; ++i)
            header_len |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
        offset = 12;
    } else {
        throw Error(path.string() + ": unsupported NPY version " + std::to_string(major));
    }
    if (bytes.size() < offset + header_len) throw Error(path.string() + ": truncated NPY header");
    const std::string dict = bytes.substr(offset, header_len);

    Header h;
    h.descr = dict_value(dict, "descr");
    const std::string fortran = dict_value(dict, "fortran_order");
    if (fortran.find("True") != std::string::npos)
        throw Error(path.string() + ": Fortran-ordered arrays are not supported");
    const std::string shape = dict_value(dict, "shape");
    std::size_t pos = 1;
    while (pos < shape.size()) {
        while (pos < shape.size() && (shape[pos] == ' ' || shape[pos] == ',')) ++pos;
        if (pos >= shape.size() || shape[pos] == ')') break;
        std::size_t used = 0;
        h.shape.push_back(std::stoull(shape.substr(pos), &used));
        pos += used;
    }
    h.data_offset = offset + header_len;
    return h;
}

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

template <typename T>
void convert(const char* src, std::size_t n, std::vector<double>& out) {
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, src + i * sizeof(T), sizeof(T));
        out[i] = static_cast<double>(v);
    }
}

std::size_t item_size(const std::string& descr) {
    if (descr.size() < 3) throw Error("unsupported npy dtype '" + descr + "'");
    return std::stoul(descr.substr(2));
}

void check_payload(const std::string& bytes, const Header& h, const std::filesystem::path& path) {
    const std::size_t need = product(h.shape) * item_size(h.descr);
    if (bytes.size() < h.data_offset + need)
        throw Error(path.string() + ": payload shorter than declared shape");
}

std::string header_text(const std::string& descr, const std::vector<std::size_t>& shape) {
    std::string dims = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        dims += std::to_string(shape[i]);
        if (shape.size() == 1 || i + 1 < shape.size()) dims += ",";
        if (i + 1 < shape.size()) dims += " ";
    }
    dims += ")";
    std::string dict = "{'descr': '" + descr + "', 'fortran_order': False, 'shape': " + dims + ", }";
    // Pad so that magic + length + dict + '\n' is a multiple of 64 bytes.
    const std::size_t total = 10 + dict.size() + 1;
    dict.append((64 - total % 64) % 64, ' ');
    dict += '\n';
    return dict;
}

void write_raw(const std::filesystem::path& path, const std::string& descr,
               const std::vector<std::size_t>& shape, const char* payload, std::size_t bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    const std::string dict = header_text(descr, shape);
    out.write(kMagic, 6);
    const char version[2] = {1, 0};
    out.write(version, 2);
    const char len[2] = {static_cast<char>(dict.size() & 0xff), static_cast<char>(dict.size() >> 8)};
    out.write(len, 2);
    out.write(dict.data(), static_cast<std::streamsize>(dict.size()));
    out.write(payload, static_cast<std::streamsize>(bytes));
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

std::size_t Array::size() const { return product(shape); }

Array read(const std::filesystem::path& path) {
    const std::string bytes = read_all(path);
    const Header h = parse_header(bytes, path);
    const std::string& d = h.descr;
    if (d.empty() || d[0] == '>') throw Error(path.string() + ": big-endian arrays are not supported");
    check_payload(bytes, h, path);
    Array a;
    a.shape = h.shape;
    const std::size_t n = product(h.shape);
    const char* src = bytes.data() + h.data_offset;
    const std::string t = d.substr(1);
    if (t == "f4") convert<float>(src, n, a.data);
    else if (t == "f8") convert<double>(src, n, a.data);
    else if (t == "i1") convert<std::int8_t>(src, n, a.data);
    else if (t == "i2") convert<std::int16_t>(src, n, a.data);
    else if (t == "i4") convert<std::int32_t>(src, n, a.data);
    else if (t == "i8") convert<std::int64_t>(src, n, a.data);
    else if (t == "u1" || t == "b1") convert<std::uint8_t>(src, n, a.data);
    else if (t == "u2") convert<std::uint16_t>(src, n, a.data);
    else if (t == "u4") convert<std::uint32_t>(src, n, a.data);
    else if (t == "u8") convert<std::uint64_t>(src, n, a.data);
    else throw Error(path.string() + ": unsupported dtype '" + d + "'");
    return a;
}

std::vector<float> read_f32(const std::filesystem::path& path, std::vector<std::size_t>& shape) {
    const std::string bytes = read_all(path);
    const Header h = parse_header(bytes, path);
    shape = h.shape;
    const std::size_t n = product(h.shape);
    std::vector<float> out(n);
    if (h.descr == "<f4") {
        check_payload(bytes, h, path);
        std::memcpy(out.data(), bytes.data() + h.data_offset, n * sizeof(float));
        return out;
    }
    const Array a = read(path);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(a.data[i]);
    return out;
}

void write(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
           const std::vector<double>& data, DType dtype) {
    if (product(shape) != data.size()) throw Error("npy::write: shape does not match data size");
    switch (dtype) {
        case DType::f64:
            write_raw(path, "<f8", shape, reinterpret_cast<const char*>(data.data()),
                      data.size() * sizeof(double));
            break;
        case DType::f32: {
            std::vector<float> f(data.begin(), data.end());
            write_raw(path, "<f4", shape, reinterpret_cast<const char*>(f.data()), f.size() * sizeof(float));
            break;
        }
        case DType::i64: {
            std::vector<std::int64_t> v(data.size());
            for (std::size_t i = 0; i < data.size(); ++i) v[i] = static_cast<std::int64_t>(data[i]);
            write_raw(path, "<i8", shape, reinterpret_cast<const char*>(v.data()),
                      v.size() * sizeof(std::int64_t));
            break;
        }
    }
}

void write_f32(const std::filesystem::path& path, const std::vector<std::size_t>& shape,
               const std::vector<float>& data) {
    if (product(shape) != data.size()) throw Error("npy::write_f32: shape does not match data size");
    write_raw(path, "<f4", shape, reinterpret_cast<const char*>(data.data()), data.size() * sizeof(float));
}

}  // namespace topomap::npy
