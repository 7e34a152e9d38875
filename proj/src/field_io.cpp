#include "hlab/field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hlab/errors.hpp"

namespace hlab {

namespace {

static_assert(std::endian::native == std::endian::little, "field dumps assume a little-endian host");

template <class T>
void put(std::ostream& os, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw IoError("truncated field file");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void write_field(const std::filesystem::path& path, const SpectralField& field) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const SpectralField nodal = field.to_nodal();
  const TorusGrid& g = nodal.grid();
  os.write(kFieldMagic, sizeof(kFieldMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.dim()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.points_per_axis()));
  put<std::uint32_t>(os, nodal.imaginary_fraction() == 0.0 ? kFlagRealValued : 0u);
  put<double>(os, g.length());
  for (const auto& z : nodal.values()) {
    put<double>(os, z.real());
    put<double>(os, z.imag());
  }
  if (!os) throw IoError("write failed for " + path.string());
}

SpectralField read_field(const std::filesystem::path& path, FieldHeader* header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kFieldMagic, 5) != 0) throw IoError("bad magic in " + path.string());
  FieldHeader h;
  h.dim = get<std::uint32_t>(is);
  h.n = get<std::uint32_t>(is);
  h.flags = get<std::uint32_t>(is);
  h.length = get<double>(is);
  TorusGrid grid(static_cast<int>(h.dim), static_cast<int>(h.n), h.length);
  std::vector<cplx> v(grid.size());
  for (auto& z : v) {
    const double re = get<double>(is);
    const double im = get<double>(is);
    z = {re, im};
  }
  if (header) *header = h;
  return SpectralField(grid, std::move(v), Representation::nodal);
}

void write_field_with_sidecar(const std::filesystem::path& path, const SpectralField& field,
                              const nlohmann::ordered_json& sidecar) {
  write_field(path, field);
  std::filesystem::path side = path;
  side += ".json";
  std::ofstream os(side, std::ios::trunc);
  if (!os) throw IoError("cannot open " + side.string() + " for writing");
  os << sidecar.dump(2) << '\n';
}

}  // namespace hlab
