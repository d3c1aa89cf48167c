#pragma once

// Data-parallel kernels used by the generator/discriminator networks and the scale pyramid.
//
// The functions in `worldgan::kernels` are the production versions, parallelised with OpenMP.
// Every output element is produced by exactly one thread with a fixed summation order, so results
// do not depend on the thread count. `worldgan::kernels::reference` holds straightforward serial
// implementations of the same contracts; tests compare the two and the benchmark times them.
//
// Convolution layout: input x is [cin][D][H][W], weights are [cout][cin][k][k][k], output y is
// [cout][D][H][W]. Kernels are odd-sized with zero "same" padding of k/2, so the spatial shape is
// preserved.

#include <cstdint>
#include <span>

#include "worldgan/level.hpp"

namespace worldgan::kernels {

struct ConvShape {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 3;
  Shape3 spatial{};
};

// y = conv(x, w)
void conv3d_forward(std::span<const float> x, std::span<const float> w, std::span<float> y,
                    const ConvShape& shape);
// gx = d<gy, conv(x, w)>/dx
void conv3d_input_grad(std::span<const float> gy, std::span<const float> w, std::span<float> gx,
                       const ConvShape& shape);
// gw = d<gy, conv(x, w)>/dw
void conv3d_weight_grad(std::span<const float> x, std::span<const float> gy, std::span<float> gw,
                        const ConvShape& shape);

// Channel-wise trilinear resampling with corner-aligned sample positions: output index i along an
// axis maps to source coordinate i*(S-1)/(T-1); a target extent of 1 samples the centre (S-1)/2.
void resample_trilinear(std::span<const float> src, Shape3 from, std::span<float> dst, Shape3 to,
                        int channels);

// For each voxel of a [m][spatial] field, the row of `rows` ([k][m]) with the smallest squared
// Euclidean distance. Ties go to the lower row index.
void nearest_rows(std::span<const float> field, std::int64_t spatial, std::span<const float> rows,
                  int k, int m, std::span<TokenId> out);

// Source coordinate of output index i when resampling an axis of extent `from` to `to`.
double resample_coordinate(int i, int from, int to);

namespace reference {

void conv3d_forward(std::span<const float> x, std::span<const float> w, std::span<float> y,
                    const ConvShape& shape);
void conv3d_input_grad(std::span<const float> gy, std::span<const float> w, std::span<float> gx,
                       const ConvShape& shape);
void conv3d_weight_grad(std::span<const float> x, std::span<const float> gy, std::span<float> gw,
                        const ConvShape& shape);
void resample_trilinear(std::span<const float> src, Shape3 from, std::span<float> dst, Shape3 to,
                        int channels);
void nearest_rows(std::span<const float> field, std::int64_t spatial, std::span<const float> rows,
                  int k, int m, std::span<TokenId> out);

}  // namespace reference

}  // namespace worldgan::kernels
