#pragma once

#include <cstdint>

#include "mdl/dataset.hpp"

namespace mdl::datagen {

/// Uniform samples on an m-sphere of the given radius and center in R^(m+1):
/// y = radius * z / |z| + center with z standard normal. Per-point seeding,
/// so results do not depend on how the work is sharded.
Matrix sample_sphere_points(std::size_t m, double radius,
                            const std::vector<double>& center,
                            std::size_t count, std::uint64_t seed);

/// Two unit hyperspheres with centers 2.5 apart (random direction).
LabeledDataset make_separated_spheres(std::size_t m, std::size_t n,
                                      std::size_t count_per_class, std::uint64_t seed);

/// Two concentric hyperspheres with radii 1.0 and 1.3 around a shared
/// random center.
LabeledDataset make_concentric_spheres(std::size_t m, std::size_t n,
                                       std::size_t count_per_class, std::uint64_t seed);

/// Two intertwined swiss rolls: outer (phi sin phi, phi cos phi, psi...),
/// inner ((phi-mu) cos phi, (phi-mu) sin phi, psi...), phi in [1.5, 4.5],
/// psi in [0, 21], mu = 1.
LabeledDataset make_swiss_rolls(std::size_t m, std::size_t n,
                                std::size_t count_per_class, std::uint64_t seed);

LabeledDataset make_dataset(const std::string& kind, std::size_t m, std::size_t n,
                            std::size_t count_per_class, std::uint64_t seed);

/// Pad each row with n - cols zeros.
Matrix embed_trivial(const Matrix& points, std::size_t n);

/// Row-wise x -> Q x + T.
Matrix apply_isometry(const Matrix& points, const Matrix& q,
                      const std::vector<double>& t);

struct CubeNormalization {
  Matrix points;
  double scale = 1.0;
  std::vector<double> offset;
};

/// Single isotropic scale plus translation landing all coordinates in
/// [0,1]; per-axis scaling would not be an isometry.
CubeNormalization normalize_to_unit_cube(const Matrix& points);

/// Exact Euclidean distance from a normalized-space point to a class
/// manifold (sphere closed form; swiss roll via 1-D search over phi).
double true_manifold_distance(const LabeledDataset& ds, std::size_t cls,
                              const std::vector<double>& normalized_point);

/// Smallest gap between the two class manifolds, in normalized units.
double analytic_interclass_gap(const LabeledDataset& ds);

}  // namespace mdl::datagen
