#pragma once

#include <span>
#include <vector>

#include "worldgan/level.hpp"

namespace worldgan {

// Dense channels x D x H x W field of 32-bit reals, channel-major.
class Field {
 public:
  Field() = default;
  Field(int channels, Shape3 shape, float fill = 0.0f)
      : channels_(channels),
        shape_(shape),
        data_(static_cast<std::size_t>(channels) * static_cast<std::size_t>(shape.volume()), fill) {}
  Field(int channels, Shape3 shape, std::vector<float> data);

  [[nodiscard]] int channels() const { return channels_; }
  [[nodiscard]] const Shape3& shape() const { return shape_; }
  [[nodiscard]] std::size_t spatial_size() const { return static_cast<std::size_t>(shape_.volume()); }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] std::span<float> data() { return data_; }
  [[nodiscard]] std::span<const float> data() const { return data_; }
  [[nodiscard]] std::vector<float>& storage() { return data_; }
  [[nodiscard]] const std::vector<float>& storage() const { return data_; }

  [[nodiscard]] std::span<float> channel(int c) {
    return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * spatial_size(), spatial_size());
  }
  [[nodiscard]] std::span<const float> channel(int c) const {
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * spatial_size(),
                                                 spatial_size());
  }

  float& at(int c, int d, int h, int w) { return data_[index(c, d, h, w)]; }
  [[nodiscard]] float at(int c, int d, int h, int w) const { return data_[index(c, d, h, w)]; }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  [[nodiscard]] std::size_t index(int c, int d, int h, int w) const {
    return ((static_cast<std::size_t>(c) * shape_.d + d) * shape_.h + h) * shape_.w + w;
  }

  int channels_ = 0;
  Shape3 shape_{0, 0, 0};
  std::vector<float> data_;
};

}  // namespace worldgan
