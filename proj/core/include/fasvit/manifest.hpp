#pragma once

#include <string>
#include <vector>

#include "fasvit/rng.hpp"
#include "fasvit/sample.hpp"

namespace fasvit {

inline constexpr const char* kManifestHeader =
    "path,label,attack_type,subject_id,session,device,video_id,frame_index";

struct ManifestRow {
  std::string path;  // as written in the file, possibly relative
  Label label = Label::kLive;
  AttackType attack = AttackType::kNone;
  std::string subject_id;
  std::string session;
  std::string device;
  std::string video_id;
  int frame_index = 0;
};

struct Manifest {
  std::string base_dir;  // directory the manifest was loaded from
  std::vector<ManifestRow> rows;
};

// Strict CSV: exact header, 8 plain comma-separated fields per row (no
// quoting), label/attack consistency enforced. With check_paths, the first
// unresolvable image path aborts the load.
Manifest load_manifest(const std::string& path, bool check_paths = true);
void save_manifest(const Manifest& manifest, const std::string& path);

std::string resolved_path(const Manifest& manifest, const ManifestRow& row);

// Reads the row's image (sample id = the manifest path field).
Sample load_sample(const Manifest& manifest, const ManifestRow& row);
std::vector<Sample> load_samples(const Manifest& manifest,
                                 const std::vector<ManifestRow>& rows);

// Uniform without-replacement choice of min(per_video, available) rows per
// video_id, rows kept in manifest order, videos visited in first-appearance
// order. Deterministic under the rng seed.
Manifest sample_frames(const Manifest& manifest, int per_video, Rng& rng);

}  // namespace fasvit
