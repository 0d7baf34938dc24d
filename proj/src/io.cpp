#include "empmr/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace empmr {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what, long line = -1) {
  std::string msg = path + ": " + what;
  if (line >= 0) msg += " (line " + std::to_string(line) + ")";
  throw std::runtime_error(msg);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  if (s.size() < suffix.size()) return false;
  for (std::size_t k = 0; k < suffix.size(); ++k) {
    if (std::tolower(static_cast<unsigned char>(s[s.size() - suffix.size() + k])) != suffix[k]) return false;
  }
  return true;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string t;
  while (in >> t) tokens.push_back(t);
  return tokens;
}

double parse_coord(const std::string& token, const std::string& path, long line) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') fail(path, "malformed number '" + token + "'", line);
  if (!std::isfinite(v)) fail(path, "non-finite coordinate '" + token + "'", line);
  return v;
}

struct PlyProperty {
  std::string type;
  std::string name;
  bool is_list = false;
};

std::size_t ply_type_size(const std::string& type, const std::string& path) {
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8") return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16") return 2;
  if (type == "int" || type == "int32" || type == "uint" || type == "uint32") return 4;
  if (type == "float" || type == "float32") return 4;
  if (type == "double" || type == "float64") return 8;
  fail(path, "unsupported PLY property type '" + type + "'");
}

double decode_scalar(const unsigned char* bytes, const std::string& type) {
  if (type == "float" || type == "float32") {
    float f;
    std::memcpy(&f, bytes, 4);
    return static_cast<double>(f);
  }
  double d;
  std::memcpy(&d, bytes, 8);
  return d;
}

PointSet read_ply(const std::string& path, double scale, int id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open file");

  std::string line;
  long line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++line_no;
    return true;
  };

  if (!next_line() || line != "ply") fail(path, "not a PLY file (missing 'ply' magic)", line_no);

  bool binary = false;
  bool have_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex_element = false;
  bool saw_vertex_element = false;
  bool saw_trailing_element = false;
  std::vector<PlyProperty> vertex_props;

  while (true) {
    if (!next_line()) fail(path, "unexpected end of header", line_no);
    if (line == "end_header") break;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0] == "comment" || tokens[0] == "obj_info") continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2) fail(path, "malformed format line", line_no);
      if (tokens[1] == "ascii") {
        binary = false;
      } else if (tokens[1] == "binary_little_endian") {
        binary = true;
      } else if (tokens[1] == "binary_big_endian") {
        fail(path, "big-endian PLY is not supported (little-endian only)", line_no);
      } else {
        fail(path, "unknown PLY format '" + tokens[1] + "'", line_no);
      }
      have_format = true;
    } else if (tokens[0] == "element") {
      if (tokens.size() < 3) fail(path, "malformed element line", line_no);
      if (tokens[1] == "vertex") {
        vertex_count = std::stoull(tokens[2]);
        in_vertex_element = true;
        saw_vertex_element = true;
      } else {
        if (!saw_vertex_element) fail(path, "element '" + tokens[1] + "' before vertex element", line_no);
        in_vertex_element = false;
        saw_trailing_element = true;
      }
    } else if (tokens[0] == "property") {
      if (!in_vertex_element) continue;  // trailing element properties are ignored
      if (tokens.size() >= 2 && tokens[1] == "list") {
        fail(path, "list properties on the vertex element are not supported", line_no);
      }
      if (tokens.size() < 3) fail(path, "malformed property line", line_no);
      vertex_props.push_back({tokens[1], tokens[2], false});
    }
  }
  if (!have_format) fail(path, "missing format line in header");
  if (!saw_vertex_element) fail(path, "no vertex element in header");
  if (vertex_count == 0) fail(path, "point set is empty (0 vertices)");

  int idx_x = -1, idx_y = -1, idx_z = -1;
  for (std::size_t p = 0; p < vertex_props.size(); ++p) {
    if (vertex_props[p].name == "x") idx_x = static_cast<int>(p);
    if (vertex_props[p].name == "y") idx_y = static_cast<int>(p);
    if (vertex_props[p].name == "z") idx_z = static_cast<int>(p);
  }
  if (idx_x < 0 || idx_y < 0 || idx_z < 0) fail(path, "vertex element lacks x/y/z properties");
  for (int idx : {idx_x, idx_y, idx_z}) {
    const std::string& t = vertex_props[static_cast<std::size_t>(idx)].type;
    if (t != "float" && t != "float32" && t != "double" && t != "float64") {
      fail(path, "coordinate property must be float or double, got '" + t + "'");
    }
  }

  PointSet set;
  set.id = id;
  set.points.reserve(vertex_count);

  if (!binary) {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!next_line()) fail(path, "vertex count mismatch: expected " + std::to_string(vertex_count) +
                                       ", got " + std::to_string(v), line_no);
      const auto tokens = split_ws(line);
      if (tokens.size() < vertex_props.size()) fail(path, "too few values on vertex line", line_no);
      const double x = parse_coord(tokens[static_cast<std::size_t>(idx_x)], path, line_no);
      const double y = parse_coord(tokens[static_cast<std::size_t>(idx_y)], path, line_no);
      const double z = parse_coord(tokens[static_cast<std::size_t>(idx_z)], path, line_no);
      set.points.emplace_back(scale * x, scale * y, scale * z);
    }
  } else {
    std::vector<std::size_t> offsets(vertex_props.size());
    std::size_t record_size = 0;
    for (std::size_t p = 0; p < vertex_props.size(); ++p) {
      offsets[p] = record_size;
      record_size += ply_type_size(vertex_props[p].type, path);
    }
    std::vector<unsigned char> record(record_size);
    for (std::size_t v = 0; v < vertex_count; ++v) {
      if (!in.read(reinterpret_cast<char*>(record.data()), static_cast<std::streamsize>(record_size))) {
        fail(path, "vertex count mismatch at record " + std::to_string(v) + " (offset " +
                       std::to_string(in.tellg()) + ")");
      }
      const double x = decode_scalar(record.data() + offsets[static_cast<std::size_t>(idx_x)],
                                     vertex_props[static_cast<std::size_t>(idx_x)].type);
      const double y = decode_scalar(record.data() + offsets[static_cast<std::size_t>(idx_y)],
                                     vertex_props[static_cast<std::size_t>(idx_y)].type);
      const double z = decode_scalar(record.data() + offsets[static_cast<std::size_t>(idx_z)],
                                     vertex_props[static_cast<std::size_t>(idx_z)].type);
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
        fail(path, "non-finite coordinate in binary record " + std::to_string(v));
      }
      set.points.emplace_back(scale * x, scale * y, scale * z);
    }
  }
  (void)saw_trailing_element;  // face/edge data is intentionally ignored
  return set;
}

PointSet read_xyz(const std::string& path, double scale, int id) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  PointSet set;
  set.id = id;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 3) fail(path, "expected three coordinates", line_no);
    const double x = parse_coord(tokens[0], path, line_no);
    const double y = parse_coord(tokens[1], path, line_no);
    const double z = parse_coord(tokens[2], path, line_no);
    set.points.emplace_back(scale * x, scale * y, scale * z);
  }
  if (set.points.empty()) fail(path, "point set is empty");
  return set;
}

void write_ply(const PointSet& set, const std::string& path, bool binary) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open file for writing");
  out << "ply\n"
      << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n")
      << "element vertex " << set.points.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "end_header\n";
  if (binary) {
    for (const auto& p : set.points) {
      const double xyz[3] = {p.x(), p.y(), p.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
  } else {
    char buf[96];
    for (const auto& p : set.points) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
      out << buf;
    }
  }
  if (!out) fail(path, "write failed");
}

void write_xyz(const PointSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open file for writing");
  char buf[96];
  for (const auto& p : set.points) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", p.x(), p.y(), p.z());
    out << buf;
  }
  if (!out) fail(path, "write failed");
}

}  // namespace

PointFormat format_from_path(const std::string& path) {
  if (ends_with(path, ".ply")) return PointFormat::PlyBinaryLE;
  if (ends_with(path, ".xyz") || ends_with(path, ".txt")) return PointFormat::XyzText;
  throw std::runtime_error(path + ": cannot infer point format from extension (use .ply or .xyz)");
}

PointSet read_point_set(const std::string& path, PointFormat format, double scale, int id) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  if (format == PointFormat::Auto) format = format_from_path(path);
  PointSet set;
  switch (format) {
    case PointFormat::PlyAscii:
    case PointFormat::PlyBinaryLE:
      set = read_ply(path, scale, id);  // flavor comes from the header
      break;
    case PointFormat::XyzText:
      set = read_xyz(path, scale, id);
      break;
    default:
      throw std::logic_error("unresolved point format");
  }
  return set;
}

void write_point_set(const PointSet& set, const std::string& path, PointFormat format) {
  if (format == PointFormat::Auto) format = format_from_path(path);
  switch (format) {
    case PointFormat::PlyAscii:
      write_ply(set, path, false);
      break;
    case PointFormat::PlyBinaryLE:
      write_ply(set, path, true);
      break;
    case PointFormat::XyzText:
      write_xyz(set, path);
      break;
    default:
      throw std::logic_error("unresolved point format");
  }
}

TransformFile read_transforms(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) fail(path, "empty file");
  ++line_no;
  if (line != "empmr-transforms v1") fail(path, "unrecognized transform file header", line_no);

  TransformFile file;
  std::size_t declared_sets = 0;
  bool have_sets = false;

  std::string pending_name;
  bool have_rotation = false;
  Eigen::Matrix3d rot;

  auto flush_entry = [&](const Eigen::Vector3d& t) {
    try {
      file.transforms.emplace_back(rot, t);
    } catch (const std::exception& e) {
      fail(path, "set '" + pending_name + "': " + e.what());
    }
    file.names.push_back(pending_name);
    pending_name.clear();
    have_rotation = false;
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    if (tokens[0] == "sets") {
      if (tokens.size() != 2) fail(path, "malformed sets line", line_no);
      declared_sets = std::stoull(tokens[1]);
      have_sets = true;
    } else if (tokens[0] == "sigma2") {
      if (tokens.size() != 2) fail(path, "malformed sigma2 line", line_no);
      file.sigma2 = parse_coord(tokens[1], path, line_no);
    } else if (tokens[0] == "meta") {
      if (tokens.size() < 3) fail(path, "malformed meta line", line_no);
      std::string value = tokens[2];
      for (std::size_t k = 3; k < tokens.size(); ++k) value += " " + tokens[k];
      file.metadata.emplace_back(tokens[1], value);
    } else if (tokens[0] == "set") {
      if (tokens.size() != 2) fail(path, "malformed set line", line_no);
      if (!pending_name.empty()) fail(path, "set '" + pending_name + "' missing rotation/translation", line_no);
      pending_name = tokens[1];
    } else if (tokens[0] == "rotation") {
      if (tokens.size() != 10) fail(path, "rotation needs 9 values", line_no);
      if (pending_name.empty()) fail(path, "rotation outside of a set entry", line_no);
      for (int k = 0; k < 9; ++k) rot(k / 3, k % 3) = parse_coord(tokens[static_cast<std::size_t>(k + 1)], path, line_no);
      have_rotation = true;
    } else if (tokens[0] == "translation") {
      if (tokens.size() != 4) fail(path, "translation needs 3 values", line_no);
      if (pending_name.empty() || !have_rotation) fail(path, "translation before rotation", line_no);
      Eigen::Vector3d t;
      for (int k = 0; k < 3; ++k) t(k) = parse_coord(tokens[static_cast<std::size_t>(k + 1)], path, line_no);
      flush_entry(t);
    } else {
      fail(path, "unknown directive '" + tokens[0] + "'", line_no);
    }
  }
  if (!pending_name.empty()) fail(path, "set '" + pending_name + "' missing rotation/translation");
  if (have_sets && declared_sets != file.transforms.size()) {
    fail(path, "declared " + std::to_string(declared_sets) + " sets but found " +
                   std::to_string(file.transforms.size()));
  }
  if (file.transforms.empty()) fail(path, "no transforms in file");
  return file;
}

void write_transforms(const TransformFile& file, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(path, "cannot open file for writing");
  char buf[512];
  out << "empmr-transforms v1\n";
  out << "sets " << file.transforms.size() << "\n";
  if (file.sigma2) {
    std::snprintf(buf, sizeof(buf), "sigma2 %.17g\n", *file.sigma2);
    out << buf;
  }
  for (const auto& [key, value] : file.metadata) out << "meta " << key << " " << value << "\n";
  for (std::size_t i = 0; i < file.transforms.size(); ++i) {
    const auto& t = file.transforms[i];
    const auto& r = t.rotation();
    out << "set " << (i < file.names.size() ? file.names[i] : "set_" + std::to_string(i)) << "\n";
    std::snprintf(buf, sizeof(buf),
                  "rotation %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g %.17g\n",
                  r(0, 0), r(0, 1), r(0, 2), r(1, 0), r(1, 1), r(1, 2), r(2, 0), r(2, 1), r(2, 2));
    out << buf;
    std::snprintf(buf, sizeof(buf), "translation %.17g %.17g %.17g\n", t.translation().x(),
                  t.translation().y(), t.translation().z());
    out << buf;
  }
  if (!out) fail(path, "write failed");
}

}  // namespace empmr
