#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "empmr/geometry.hpp"

namespace empmr {

enum class PointFormat { Auto, PlyAscii, PlyBinaryLE, XyzText };

/// Auto resolves from the file extension (.ply / .xyz); PLY flavor comes
/// from the header on read.
PointFormat format_from_path(const std::string& path);

PointSet read_point_set(const std::string& path, PointFormat format = PointFormat::Auto,
                        double scale = 1.0, int id = 0);

void write_point_set(const PointSet& set, const std::string& path,
                     PointFormat format = PointFormat::Auto);

/// Human-diffable transform container; rotations are row-major and
/// SO(3)-validated on load. Unknown metadata keys survive a round trip.
struct TransformFile {
  std::vector<std::string> names;
  std::vector<RigidTransform> transforms;
  std::optional<double> sigma2;
  std::vector<std::pair<std::string, std::string>> metadata;
};

TransformFile read_transforms(const std::string& path);
void write_transforms(const TransformFile& file, const std::string& path);

}  // namespace empmr
