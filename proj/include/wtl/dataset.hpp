#pragma once

// Training records and their on-disk stream format.
//
// File layout (all integers and floats little-endian):
//   8 bytes   magic "WTLDSET\0"
//   u32       version (1)
//   u32       patch side (13)
//   u32       patch channels (4)
//   u64       train record count
//   u64       validation record count
//   u64       split seed
//   records   train records, then validation records; each is
//             676 x f32 patch (channel-major), f32 label in degrees,
//             u32 image id, u32 chain index, i32 jitter side (-1, 0, +1)

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wtl/binary_io.hpp"
#include "wtl/errors.hpp"
#include "wtl/raster.hpp"

namespace wtl {

struct LabelRecord {
  Patch patch;
  Angle alpha_label;
  std::uint32_t image_id = 0;
  std::uint32_t chain_index = 0;
  std::int32_t jitter = 0;  // perpendicular displacement side, 0 = on the chain

  friend bool operator==(const LabelRecord&, const LabelRecord&) = default;
};

struct DatasetSplit {
  std::vector<LabelRecord> train;
  std::vector<LabelRecord> validation;
  std::uint64_t split_seed = 0;

  std::size_t size() const { return train.size() + validation.size(); }
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

inline constexpr char kDatasetMagic[8] = {'W', 'T', 'L', 'D', 'S', 'E', 'T', '\0'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const DatasetSplit& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
  bin::Writer w(out);
  w.bytes(kDatasetMagic, 8);
  w.u32(kDatasetVersion);
  w.u32(Patch::kSide);
  w.u32(Patch::kChannels);
  w.u64(ds.train.size());
  w.u64(ds.validation.size());
  w.u64(ds.split_seed);
  for (const auto* part : {&ds.train, &ds.validation}) {
    for (const auto& r : *part) {
      for (float v : r.patch.values) w.f32(v);
      w.f32(static_cast<float>(r.alpha_label.deg()));
      w.u32(r.image_id);
      w.u32(r.chain_index);
      w.i32(r.jitter);
    }
  }
  if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
}

inline DatasetSplit load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  bin::Reader r(in, path.string());
  char magic[8];
  r.bytes(magic, 8, "magic");
  if (std::string(magic, 8) != std::string(kDatasetMagic, 8)) fail(ErrorKind::format, path.string() + ": not a dataset file");
  const auto version = r.u32("version");
  if (version != kDatasetVersion) {
    fail(ErrorKind::format, path.string() + ": unsupported dataset version " + std::to_string(version));
  }
  if (r.u32("patch side") != Patch::kSide || r.u32("patch channels") != Patch::kChannels) {
    fail(ErrorKind::format, path.string() + ": unexpected patch shape");
  }
  const auto n_train = r.u64("train count");
  const auto n_val = r.u64("validation count");
  DatasetSplit ds;
  ds.split_seed = r.u64("split seed");
  auto read_records = [&](std::vector<LabelRecord>& dst, std::uint64_t n) {
    dst.resize(static_cast<std::size_t>(n));
    for (auto& rec : dst) {
      for (float& v : rec.patch.values) v = r.f32("record patch");
      rec.alpha_label = Angle::degrees(r.f32("record label"));
      rec.image_id = r.u32("record image id");
      rec.chain_index = r.u32("record chain index");
      rec.jitter = r.i32("record jitter");
    }
  };
  read_records(ds.train, n_train);
  read_records(ds.validation, n_val);
  return ds;
}

}  // namespace wtl
