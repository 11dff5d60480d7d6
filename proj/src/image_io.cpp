#include "rsseg/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

namespace rsseg {

namespace {

struct Pnm {
    int channels = 0;
    Index width = 0;
    Index height = 0;
    int maxval = 0;
    std::vector<std::uint16_t> samples;
};

Pnm read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open image " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    const std::string where = "image " + path.string();

    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&] {
        skip_space();
        long v = 0;
        std::size_t start = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
        if (pos == start) throw FormatError(where + ": malformed header");
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw FormatError(where + ": not a binary PGM/PPM file");
    }
    Pnm p;
    p.channels = bytes[1] == '5' ? 1 : 3;
    pos = 2;
    p.width = read_int();
    p.height = read_int();
    p.maxval = static_cast<int>(read_int());
    if (p.maxval <= 0 || p.maxval > 65535) throw FormatError(where + ": bad maxval");
    ++pos;  // single whitespace before raster
    const std::size_t bps = p.maxval > 255 ? 2 : 1;
    const auto n = static_cast<std::size_t>(p.width * p.height * p.channels);
    if (bytes.size() < pos + n * bps) throw FormatError(where + ": truncated raster");
    p.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.samples[i] = bps == 1 ? bytes[pos + i]
                                : static_cast<std::uint16_t>((bytes[pos + 2 * i] << 8) | bytes[pos + 2 * i + 1]);
    }
    return p;
}

void write_pnm(const std::filesystem::path& path, int channels, Index width, Index height, int maxval,
               const std::vector<std::uint16_t>& samples) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write image " + path.string());
    os << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n" << maxval << "\n";
    std::vector<char> raster;
    raster.reserve(samples.size() * (maxval > 255 ? 2 : 1));
    for (auto s : samples) {
        if (maxval > 255) raster.push_back(static_cast<char>(s >> 8));
        raster.push_back(static_cast<char>(s & 0xff));
    }
    os.write(raster.data(), static_cast<std::streamsize>(raster.size()));
    if (!os) throw FormatError("short write to " + path.string());
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
    const Pnm p = read_pnm(path);
    Image img(p.height, p.width, p.channels);
    const double scale = p.maxval > 255 ? 255.0 / p.maxval : 1.0;
    for (Index r = 0; r < p.height; ++r) {
        for (Index c = 0; c < p.width; ++c) {
            for (int k = 0; k < p.channels; ++k) {
                const auto s = p.samples[static_cast<std::size_t>((r * p.width + c) * p.channels + k)];
                img.channels[static_cast<std::size_t>(k)](r, c) = static_cast<float>(s * scale);
            }
        }
    }
    return img;
}

void write_image(const std::filesystem::path& path, const Image& image) {
    const int ch = image.n_channels();
    if (ch != 1 && ch != 3) throw InvalidArgument("write_image: need 1 or 3 channels, got " + std::to_string(ch));
    std::vector<std::uint16_t> samples;
    samples.reserve(static_cast<std::size_t>(image.height() * image.width() * ch));
    for (Index r = 0; r < image.height(); ++r) {
        for (Index c = 0; c < image.width(); ++c) {
            for (int k = 0; k < ch; ++k) {
                const float v = image.channels[static_cast<std::size_t>(k)](r, c);
                samples.push_back(static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L)));
            }
        }
    }
    write_pnm(path, ch, image.width(), image.height(), 255, samples);
}

void write_mask_pgm(const std::filesystem::path& path, const BinaryGrid& mask) {
    std::vector<std::uint16_t> samples(static_cast<std::size_t>(mask.size()));
    for (Index i = 0; i < mask.size(); ++i) samples[static_cast<std::size_t>(i)] = mask.data()[i] ? 255 : 0;
    write_pnm(path, 1, mask.cols(), mask.rows(), 255, samples);
}

BinaryGrid read_mask_pgm(const std::filesystem::path& path) {
    const Pnm p = read_pnm(path);
    if (p.channels != 1) throw FormatError("mask " + path.string() + " is not single-channel");
    BinaryGrid g(p.height, p.width);
    for (Index i = 0; i < g.size(); ++i) g.data()[i] = p.samples[static_cast<std::size_t>(i)] != 0;
    return g;
}

void write_pgm16(const std::filesystem::path& path, const Grid<std::uint16_t>& g) {
    std::vector<std::uint16_t> samples(g.data(), g.data() + g.size());
    write_pnm(path, 1, g.cols(), g.rows(), 65535, samples);
}

Grid<std::uint16_t> read_pgm16(const std::filesystem::path& path) {
    const Pnm p = read_pnm(path);
    if (p.channels != 1) throw FormatError(path.string() + " is not single-channel");
    Grid<std::uint16_t> g(p.height, p.width);
    std::copy(p.samples.begin(), p.samples.end(), g.data());
    return g;
}

void export_saliency(const std::filesystem::path& stem, const MapGrid& map) {
    const double lo = map.size() ? map.minCoeff() : 0.0;
    const double hi = map.size() ? map.maxCoeff() : 0.0;
    const double range = hi - lo;
    Grid<std::uint16_t> q(map.rows(), map.cols());
    for (Index i = 0; i < map.size(); ++i) {
        q.data()[i] = range > 0.0 ? static_cast<std::uint16_t>(std::lround((map.data()[i] - lo) / range * 65535.0)) : 0;
    }
    auto pgm = stem;
    pgm += ".pgm";
    write_pgm16(pgm, q);
    auto side = stem;
    side += ".json";
    std::ofstream os(side);
    os << nlohmann::json{{"min", lo}, {"max", hi}, {"levels", 65535}, {"step", range / 65535.0}}.dump(2) << "\n";
}

MapGrid import_saliency(const std::filesystem::path& stem) {
    auto side = stem;
    side += ".json";
    std::ifstream is(side);
    if (!is) throw FormatError("missing saliency sidecar " + side.string());
    nlohmann::json j;
    is >> j;
    auto pgm = stem;
    pgm += ".pgm";
    const auto q = read_pgm16(pgm);
    const double lo = j.at("min").get<double>(), hi = j.at("max").get<double>();
    return lo + q.cast<double>() / 65535.0 * (hi - lo);
}

}  // namespace rsseg
