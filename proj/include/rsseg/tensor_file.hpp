#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace rsseg {

struct TensorArray {
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    std::int64_t count() const;
};

/// Named float32 arrays in one file:
///
///   8 bytes   magic "RSTENSR1"
///   8 bytes   header length N, unsigned little-endian
///   N bytes   JSON header {"arrays": [{"name", "shape", "offset"}...], "meta": {...}}
///   payload   little-endian float32 values; offsets are in bytes from payload start
class TensorFile {
public:
    std::map<std::string, TensorArray> arrays;
    nlohmann::json meta = nlohmann::json::object();

    bool contains(const std::string& name) const { return arrays.contains(name); }
    /// Throws FormatError naming the array when absent.
    const TensorArray& get(const std::string& name) const;
    void put(std::string name, TensorArray array);

    static TensorFile read(const std::filesystem::path& path);
    void write(const std::filesystem::path& path) const;
};

}  // namespace rsseg
