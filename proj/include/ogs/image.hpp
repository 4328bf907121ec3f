#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ogs {

/// Row-major H x W x C double buffer. Pixel (x, y) channel c lives at
/// (y * width + x) * channels + c.
struct Image {
    int height = 0, width = 0, channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h < 0 || w < 0 || c <= 0) throw std::invalid_argument("Image: bad dimensions");
    }

    double& at(int y, int x, int c) { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<std::size_t>(y) * width + x) * channels + c]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

}  // namespace ogs
