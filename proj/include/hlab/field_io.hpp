#pragma once

// Binary field dump.
//
//   offset  size  content
//   0       5     magic "HLAB1"
//   5       4     u32 dimension d
//   9       4     u32 points per axis n
//   13      4     u32 flags (bit 0: field is real-valued)
//   17      8     f64 side length L
//   25      16*N  N = n^d nodal values, (re, im) f64 pairs, row-major
//
// All integers and floats are little-endian. A JSON sidecar `<path>.json`
// carries the seed and provenance.

#include <cstdint>
#include <filesystem>
#include <json.hpp>

#include "hlab/grid.hpp"

namespace hlab {

inline constexpr char kFieldMagic[5] = {'H', 'L', 'A', 'B', '1'};
inline constexpr std::uint32_t kFlagRealValued = 1u;

struct FieldHeader {
  std::uint32_t dim = 0;
  std::uint32_t n = 0;
  std::uint32_t flags = 0;
  double length = 0.0;
};

void write_field(const std::filesystem::path& path, const SpectralField& field);
SpectralField read_field(const std::filesystem::path& path, FieldHeader* header = nullptr);

/// Writes `path` with the field and `path + ".json"` with `sidecar`.
void write_field_with_sidecar(const std::filesystem::path& path, const SpectralField& field,
                              const nlohmann::ordered_json& sidecar);

}  // namespace hlab
