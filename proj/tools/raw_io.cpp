#include "raw_io.hpp"

#include <algorithm>

#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <iterator>
#include <vector>

#include <json.hpp>

#include "miner/error.hpp"

namespace miner::cli {

namespace {

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::Io, path.string() + ": " + why);
}

GridSignal sample_shape(std::size_t n, const std::function<bool(double, double, double)>& inside) {
  GridSignal vol = GridSignal::volume(n, n, n);
  std::size_t i = 0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t c = 0; c < n; ++c) {
        vol[i++] = inside(a + 0.5, b + 0.5, c + 0.5) ? 1.0f : 0.0f;
      }
    }
  }
  return vol;
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& raw) {
  std::filesystem::path p = raw;
  p += ".json";
  return p;
}

bool has_sidecar(const std::filesystem::path& path) { return std::filesystem::exists(sidecar_path(path)); }

GridSignal read_raw(const std::filesystem::path& raw) {
  const auto side = sidecar_path(raw);
  std::ifstream meta_in(side);
  if (!meta_in) io_fail(side, "missing volume sidecar");
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    io_fail(side, std::string("bad sidecar JSON: ") + e.what());
  }
  std::vector<std::size_t> dims;
  std::string dtype = "u8";
  std::size_t channels = 1;
  try {
    dims = meta.at("dims").get<std::vector<std::size_t>>();
    if (meta.contains("dtype")) dtype = meta.at("dtype").get<std::string>();
    if (meta.contains("channels")) channels = meta.at("channels").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    io_fail(side, std::string("bad sidecar fields: ") + e.what());
  }
  if (dims.size() != 2 && dims.size() != 3) io_fail(side, "dims must have 2 or 3 entries");
  if (dtype != "u8" && dtype != "f32") io_fail(side, "dtype must be u8 or f32");

  std::ifstream in(raw, std::ios::binary);
  if (!in) io_fail(raw, "cannot open");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  GridSignal vol;
  try {
    vol = GridSignal(dims.size() == 3 ? DomainKind::Volume3D : DomainKind::Image2D, dims, channels);
  } catch (const Error& e) {
    io_fail(side, e.what());
  }
  auto out = vol.values();
  const std::size_t width = dtype == "u8" ? 1 : 4;
  if (bytes.size() != out.size() * width) io_fail(raw, "size does not match sidecar dims");
  if (dtype == "f32") {
    std::memcpy(out.data(), bytes.data(), bytes.size());
  } else {
    bool binary = true;
    for (char b : bytes) binary = binary && static_cast<unsigned char>(b) <= 1;
    const float scale = binary ? 1.0f : 1.0f / 255.0f;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(static_cast<unsigned char>(bytes[i])) * scale;
  }
  return vol;
}

void write_raw(const GridSignal& volume, const std::filesystem::path& raw, VoxelType type) {
  const bool is_volume = volume.kind() == DomainKind::Volume3D;
  std::ofstream out(raw, std::ios::binary);
  if (!out) io_fail(raw, "cannot open for writing");
  const auto v = volume.values();
  if (type == VoxelType::F32) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    std::vector<char> bytes(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      bytes[i] = is_volume ? (v[i] >= 0.5f ? 1 : 0)
                           : static_cast<char>(std::lround(std::clamp(v[i], 0.0f, 1.0f) * 255.0f));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  if (!out) io_fail(raw, "write failed");

  nlohmann::json meta;
  meta["dims"] = volume.dims();
  meta["dtype"] = type == VoxelType::F32 ? "f32" : "u8";
  if (!is_volume) meta["channels"] = volume.channels();
  const auto side = sidecar_path(raw);
  std::ofstream meta_out(side);
  if (!meta_out) io_fail(side, "cannot open for writing");
  meta_out << meta.dump() << '\n';
  if (!meta_out) io_fail(side, "write failed");
}

GridSignal make_sphere(std::size_t n, double radius) {
  const double c = n / 2.0;
  return make_sphere(n, radius, {c, c, c});
}

GridSignal make_sphere(std::size_t n, double radius, const std::array<double, 3>& center) {
  return sample_shape(n, [&](double a, double b, double c) {
    const double da = a - center[0];
    const double db = b - center[1];
    const double dc = c - center[2];
    return da * da + db * db + dc * dc <= radius * radius;
  });
}

GridSignal make_torus(std::size_t n, double major, double minor) {
  const double m = n / 2.0;
  return sample_shape(n, [&](double a, double b, double c) {
    const double ring = std::hypot(b - m, c - m) - major;
    return ring * ring + (a - m) * (a - m) <= minor * minor;
  });
}

GridSignal make_csg(std::size_t n, double half, double radius) {
  const double m = n / 2.0;
  return sample_shape(n, [&](double a, double b, double c) {
    const bool in_cube = std::abs(a - m) <= half && std::abs(b - m) <= half && std::abs(c - m) <= half;
    const double r2 = (a - m) * (a - m) + (b - m) * (b - m) + (c - m) * (c - m);
    return in_cube && r2 > radius * radius;
  });
}

}  // namespace miner::cli
