#pragma once

// Reference computations for the tests. Straight loops with no shared code
// paths with the library's batched kernels.

#include <cstddef>
#include <random>
#include <vector>

#include "dbpc/tensor.hpp"

namespace dbpc::oracle {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

inline Tensor naive_matvec(const Tensor& w, const Tensor& x) {
  Tensor out({w.dim(0)});
  for (std::size_t i = 0; i < w.dim(0); ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < w.dim(1); ++j) sum += w.at(i, j) * x[j];
    out[i] = sum;
  }
  return out;
}

// Direct zero-padded stride-1 convolution (cross-correlation), C x H x W.
inline Tensor naive_conv(const Tensor& in, const ConvKernel& k) {
  const std::size_t c_in = in.dim(0), h = in.dim(1), w = in.dim(2);
  const auto p = static_cast<long>(k.padding());
  Tensor out({k.out_channels(), h, w});
  for (std::size_t o = 0; o < k.out_channels(); ++o)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double sum = 0.0;
        for (std::size_t c = 0; c < c_in; ++c)
          for (std::size_t ky = 0; ky < k.size(); ++ky)
            for (std::size_t kx = 0; kx < k.size(); ++kx) {
              const long sy = static_cast<long>(y + ky) - p;
              const long sx = static_cast<long>(x + kx) - p;
              if (sy < 0 || sx < 0 || sy >= static_cast<long>(h) || sx >= static_cast<long>(w)) continue;
              sum += k(o, c, ky, kx) * in[(c * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
            }
        out[(o * h + y) * w + x] = sum;
      }
  return out;
}

// Dense matrix of a linear map, built column by column from unit inputs.
template <typename Map>
inline Tensor materialize(const Map& map, const Shape& in_shape, std::size_t out_size) {
  const std::size_t n = shape_size(in_shape);
  Tensor dense({out_size, n});
  for (std::size_t j = 0; j < n; ++j) {
    Tensor e(in_shape);
    e[j] = 1.0;
    const Tensor col = map(e);
    for (std::size_t i = 0; i < out_size; ++i) dense.at(i, j) = col[i];
  }
  return dense;
}

inline Tensor transpose(const Tensor& m) {
  Tensor t({m.dim(1), m.dim(0)});
  for (std::size_t i = 0; i < m.dim(0); ++i)
    for (std::size_t j = 0; j < m.dim(1); ++j) t.at(j, i) = m.at(i, j);
  return t;
}

}  // namespace dbpc::oracle
