#include "worldgan/field.hpp"

#include "worldgan/errors.hpp"

namespace worldgan {

Field::Field(int channels, Shape3 shape, std::vector<float> data)
    : channels_(channels), shape_(shape), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(channels) * static_cast<std::size_t>(shape.volume())) {
    throw ValidationError("field data size does not match " + std::to_string(channels) + " x " +
                          to_string(shape));
  }
}

}  // namespace worldgan
