#include "rsseg/tensor_file.hpp"

#include "rsseg/core.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>

namespace rsseg {

namespace {

constexpr std::array<char, 8> kMagic = {'R', 'S', 'T', 'E', 'N', 'S', 'R', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    std::array<unsigned char, 8> b{};
    for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void put_f32(std::string& out, float f) {
    const auto u = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
    const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                            (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    return std::bit_cast<float>(u);
}

}  // namespace

std::int64_t TensorArray::count() const {
    return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

const TensorArray& TensorFile::get(const std::string& name) const {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw FormatError("tensor file has no array '" + name + "'");
    return it->second;
}

void TensorFile::put(std::string name, TensorArray array) {
    if (array.count() != static_cast<std::int64_t>(array.data.size())) {
        throw InvalidArgument("array '" + name + "': shape does not match data length");
    }
    arrays.insert_or_assign(std::move(name), std::move(array));
}

void TensorFile::write(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["arrays"] = nlohmann::json::array();
    std::string payload;
    for (const auto& [name, a] : arrays) {
        header["arrays"].push_back({{"name", name}, {"shape", a.shape}, {"offset", payload.size()}});
        for (float f : a.data) put_f32(payload, f);
    }
    header["meta"] = meta;
    const std::string text = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot write tensor file " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put_u64(os, text.size());
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!os) throw FormatError("short write to " + path.string());
}

TensorFile TensorFile::read(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open tensor file " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const std::string where = "tensor file " + path.string();
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(where + ": bad magic");
    }
    const std::uint64_t hlen = get_u64(bytes.data() + 8);
    if (hlen > bytes.size() - 16) throw FormatError(where + ": truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(where + ": " + e.what());
    }
    const std::size_t base = 16 + hlen;
    const std::size_t payload = bytes.size() - base;

    TensorFile tf;
    if (header.contains("meta")) tf.meta = header["meta"];
    for (const auto& entry : header.value("arrays", nlohmann::json::array())) {
        TensorArray a;
        const auto name = entry.at("name").get<std::string>();
        a.shape = entry.at("shape").get<std::vector<std::int64_t>>();
        const auto offset = entry.at("offset").get<std::uint64_t>();
        const std::int64_t n = a.count();
        if (n < 0 || offset + static_cast<std::uint64_t>(n) * 4 > payload) {
            throw FormatError(where + ": array '" + name + "' overruns payload");
        }
        a.data.resize(static_cast<std::size_t>(n));
        const unsigned char* p = bytes.data() + base + offset;
        for (std::int64_t i = 0; i < n; ++i) a.data[static_cast<std::size_t>(i)] = get_f32(p + 4 * i);
        tf.arrays.emplace(name, std::move(a));
    }
    return tf;
}

}  // namespace rsseg
