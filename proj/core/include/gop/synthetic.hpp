#pragma once

// Small synthetic problems used by the tests, benchmarks and the CLI.

#include <cstdint>

#include "gop/dataset.hpp"

namespace gop {

/// Two interleaving half circles with Gaussian noise, n/2 samples per class.
Dataset make_two_moons(std::size_t n, double noise, std::uint64_t seed);

/// Four Gaussian clusters at (+-1, +-1); opposite corners share a class.
Dataset make_xor_blobs(std::size_t n, double stddev, std::uint64_t seed);

/// `classes` isotropic Gaussian clusters in `dim` dimensions whose centres lie
/// `separation` apart along distinct axes.
Dataset make_gaussian_blobs(std::size_t n, std::size_t classes, std::size_t dim, double separation,
                            double stddev, std::uint64_t seed);

/// Standard normal features with labels drawn independently of them.
Dataset make_noise(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed);

/// Regression targets produced by one random GOP block of the given operator
/// set followed by a random linear map: X ~ N(0, 1), Y = f(X) V.
LabeledSet make_planted_teacher(std::size_t n, std::size_t dim, std::size_t width, std::size_t outputs,
                                const OperatorSet& op_set, std::uint64_t seed);

}  // namespace gop
