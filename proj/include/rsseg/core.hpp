#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsseg {

/// Row-major dense grid. Every spatial quantity in the library (masks,
/// saliency maps, image planes) is one of these so that row-major
/// flattening matches the on-disk run-length encoding.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BinaryGrid = Grid<bool>;
using MapGrid = Grid<double>;
using Plane = Grid<float>;

using Index = Eigen::Index;
using MaskId = std::int64_t;
using ClassId = std::int32_t;

/// Reserved sink class for background prompt entries.
inline constexpr ClassId kBackground = -1;

struct ImageSize {
    Index height = 0;
    Index width = 0;

    friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

template <typename Derived>
ImageSize size_of(const Eigen::DenseBase<Derived>& g) {
    return {g.rows(), g.cols()};
}

std::string to_string(ImageSize s);

/// Multi-channel float image, values nominally in [0, 255].
struct Image {
    std::vector<Plane> channels;

    Image() = default;
    Image(Index height, Index width, int n_channels);

    Index height() const { return channels.empty() ? 0 : channels.front().rows(); }
    Index width() const { return channels.empty() ? 0 : channels.front().cols(); }
    int n_channels() const { return static_cast<int>(channels.size()); }
    ImageSize size() const { return {height(), width()}; }
    bool empty() const { return channels.empty() || height() == 0 || width() == 0; }

    friend bool operator==(const Image& a, const Image& b);
};

// Error hierarchy. All library failures are reported by exception.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeMismatch : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class BackendError : public Error {
public:
    using Error::Error;
};

template <typename A, typename B>
void require_same_shape(const Eigen::DenseBase<A>& a, const Eigen::DenseBase<B>& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeMismatch(std::string(what) + ": shape " + to_string(size_of(a)) + " vs " +
                            to_string(size_of(b)));
    }
}

}  // namespace rsseg
