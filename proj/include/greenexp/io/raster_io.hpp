#pragma once

// Green rasters on disk.
//
// ESRI ASCII grid (.asc): the usual six-line header (xllcorner or xllcenter,
// NODATA_value optional), rows north to south, any non-zero value other than
// NODATA is green.
//
// Flat binary (.grnr), all little-endian:
//   char[4]  "GRNR"
//   u32      version (1)
//   f64      origin x, origin y   (south-west corner)
//   f64      cell size
//   u64      width, height
//   bits     rows north to south, each row packed LSB-first into ceil(width / 8) bytes

#include <greenexp/error.hpp>
#include <greenexp/geo/raster.hpp>

#include <fmt/format.h>

#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace greenexp::io {

inline constexpr std::array<char, 4> kRasterMagic{'G', 'R', 'N', 'R'};
inline constexpr std::uint32_t kRasterVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary raster IO assumes a little-endian host");

template <class T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& pos, const std::string& source) {
    if (pos + sizeof(T) > in.size()) throw IngestError(source + ": truncated raster header", {});
    T v;
    std::memcpy(&v, in.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace detail

inline std::string encode_binary(const GreenRaster& r) {
    std::string out(kRasterMagic.begin(), kRasterMagic.end());
    detail::put(out, kRasterVersion);
    detail::put(out, r.origin().x());
    detail::put(out, r.origin().y());
    detail::put(out, r.cell_size());
    detail::put(out, static_cast<std::uint64_t>(r.width()));
    detail::put(out, static_cast<std::uint64_t>(r.height()));
    const std::size_t row_bytes = (r.width() + 7) / 8;
    for (std::size_t k = 0; k < r.height(); ++k) {
        const std::size_t row = r.height() - 1 - k;
        std::string bytes(row_bytes, '\0');
        for (std::size_t c = 0; c < r.width(); ++c)
            if (r.at(c, row)) bytes[c >> 3] = static_cast<char>(bytes[c >> 3] | (1 << (c & 7)));
        out += bytes;
    }
    return out;
}

inline GreenRaster decode_binary(const std::string& data, const std::string& source = "<memory>") {
    if (data.size() < 4 || std::memcmp(data.data(), kRasterMagic.data(), 4) != 0)
        throw IngestError(source + ": not a GRNR raster", {});
    std::size_t pos = 4;
    const auto version = detail::take<std::uint32_t>(data, pos, source);
    if (version != kRasterVersion) throw IngestError(source + ": unsupported raster version " + std::to_string(version), {});
    const auto ox = detail::take<double>(data, pos, source);
    const auto oy = detail::take<double>(data, pos, source);
    const auto cs = detail::take<double>(data, pos, source);
    const auto w = detail::take<std::uint64_t>(data, pos, source);
    const auto h = detail::take<std::uint64_t>(data, pos, source);
    const std::size_t row_bytes = (w + 7) / 8;
    if (w == 0 || h == 0 || data.size() - pos != row_bytes * h)
        throw IngestError(source + ": raster payload does not match its " + std::to_string(w) + "x" + std::to_string(h) + " header", {});
    GreenRaster r(Point{ox, oy}, cs, w, h);
    for (std::size_t k = 0; k < h; ++k) {
        const std::size_t row = h - 1 - k;
        const auto* bytes = reinterpret_cast<const unsigned char*>(data.data() + pos + k * row_bytes);
        for (std::size_t c = 0; c < w; ++c)
            if ((bytes[c >> 3] >> (c & 7)) & 1u) r.set(c, row);
    }
    return r;
}

inline std::string encode_ascii_grid(const GreenRaster& r) {
    std::string out = fmt::format("ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\nNODATA_value -9999\n",
                                  r.width(), r.height(), r.origin().x(), r.origin().y(), r.cell_size());
    out.reserve(out.size() + r.size() * 2);
    for (std::size_t k = 0; k < r.height(); ++k) {
        const std::size_t row = r.height() - 1 - k;
        for (std::size_t c = 0; c < r.width(); ++c) {
            if (c) out += ' ';
            out += r.at(c, row) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

inline GreenRaster decode_ascii_grid(const std::string& text, const std::string& source = "<memory>") {
    std::istringstream in(text);
    std::map<std::string, double> header;
    std::string key;
    while (header.size() < 6 && in >> key) {
        std::string lower;
        for (char ch : key) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        if (!lower.empty() && (std::isdigit(static_cast<unsigned char>(lower[0])) || lower[0] == '-')) {
            // Header without NODATA_value: this token is the first cell.
            for (auto it = key.rbegin(); it != key.rend(); ++it) in.putback(*it);
            break;
        }
        double v = 0.0;
        if (!(in >> v)) throw IngestError(source + ": bad header value for '" + key + "'", {});
        header[lower] = v;
    }
    auto need = [&](const char* k) {
        auto it = header.find(k);
        if (it == header.end()) throw IngestError(source + ": ASCII grid header lacks '" + std::string(k) + "'", {});
        return it->second;
    };
    const auto w = static_cast<std::size_t>(need("ncols"));
    const auto h = static_cast<std::size_t>(need("nrows"));
    const double cs = need("cellsize");
    double ox = 0.0, oy = 0.0;
    if (header.count("xllcorner")) ox = header["xllcorner"];
    else ox = need("xllcenter") - 0.5 * cs;
    if (header.count("yllcorner")) oy = header["yllcorner"];
    else oy = need("yllcenter") - 0.5 * cs;
    const bool has_nodata = header.count("nodata_value") > 0;
    const double nodata = has_nodata ? header["nodata_value"] : 0.0;
    GreenRaster r(Point{ox, oy}, cs, w, h);
    for (std::size_t k = 0; k < h; ++k) {
        for (std::size_t c = 0; c < w; ++c) {
            double v = 0.0;
            if (!(in >> v)) throw IngestError(source + ": ASCII grid has fewer than ncols x nrows values", {});
            if (v != 0.0 && !(has_nodata && v == nodata)) r.set(c, h - 1 - k);
        }
    }
    return r;
}

inline GreenRaster read_raster(const std::filesystem::path& path) {
    const std::string data = detail::slurp(path);
    if (data.size() >= 4 && std::memcmp(data.data(), kRasterMagic.data(), 4) == 0) return decode_binary(data, path.string());
    return decode_ascii_grid(data, path.string());
}

} // namespace greenexp::io
