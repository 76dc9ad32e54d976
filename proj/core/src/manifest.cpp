#include "fasvit/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "fasvit/common.hpp"
#include "fasvit/image_io.hpp"

namespace fs = std::filesystem;

namespace fasvit {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Manifest load_manifest(const std::string& path, bool check_paths) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  Manifest m;
  m.base_dir = fs::path(path).parent_path().string();

  std::string line;
  if (!std::getline(in, line)) throw IoError("manifest '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    throw IoError("manifest '" + path + "' has a wrong header: '" + line + "'");

  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 8)
      throw IoError(where + ": expected 8 fields, got " + std::to_string(f.size()));
    ManifestRow row;
    row.path = f[0];
    try {
      row.label = label_from_string(f[1]);
      row.attack = attack_from_string(f[2]);
    } catch (const std::invalid_argument& e) {
      throw IoError(where + ": " + e.what());
    }
    if (!label_attack_consistent(row.label, row.attack))
      throw IoError(where + ": label '" + f[1] + "' inconsistent with attack type '" + f[2] + "'");
    row.subject_id = f[3];
    row.session = f[4];
    row.device = f[5];
    row.video_id = f[6];
    try {
      size_t used = 0;
      row.frame_index = std::stoi(f[7], &used);
      if (used != f[7].size()) throw std::invalid_argument(f[7]);
    } catch (const std::exception&) {
      throw IoError(where + ": frame_index '" + f[7] + "' is not an integer");
    }
    if (row.frame_index < 0) throw IoError(where + ": negative frame_index");
    m.rows.push_back(std::move(row));
  }

  if (check_paths) {
    for (const auto& row : m.rows) {
      const std::string p = resolved_path(m, row);
      if (!fs::exists(p)) throw IoError("manifest '" + path + "': missing image '" + p + "'");
    }
  }
  return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ostringstream os;
  os << kManifestHeader << "\n";
  for (const auto& r : manifest.rows) {
    for (const std::string* field :
         {&r.path, &r.subject_id, &r.session, &r.device, &r.video_id}) {
      if (field->find_first_of(",\n\r") != std::string::npos)
        throw std::invalid_argument("save_manifest: field contains a separator: '" + *field + "'");
    }
    os << r.path << ',' << to_string(r.label) << ',' << to_string(r.attack) << ','
       << r.subject_id << ',' << r.session << ',' << r.device << ',' << r.video_id << ','
       << r.frame_index << "\n";
  }
  const std::string text = os.str();
  write_file(path, text.data(), text.size());
}

std::string resolved_path(const Manifest& manifest, const ManifestRow& row) {
  fs::path p(row.path);
  if (p.is_absolute() || manifest.base_dir.empty()) return row.path;
  return (fs::path(manifest.base_dir) / p).string();
}

Sample load_sample(const Manifest& manifest, const ManifestRow& row) {
  Sample s;
  s.id = row.path;
  s.image = read_image(resolved_path(manifest, row));
  s.label = row.label;
  s.attack = row.attack;
  s.subject_id = row.subject_id;
  s.session = row.session;
  s.device = row.device;
  s.video_id = row.video_id;
  s.frame_index = row.frame_index;
  return s;
}

std::vector<Sample> load_samples(const Manifest& manifest,
                                 const std::vector<ManifestRow>& rows) {
  std::vector<Sample> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(load_sample(manifest, r));
  return out;
}

Manifest sample_frames(const Manifest& manifest, int per_video, Rng& rng) {
  if (per_video < 1) throw std::invalid_argument("sample_frames: per_video must be positive");

  std::vector<std::string> video_order;
  std::map<std::string, std::vector<size_t>> by_video;
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& vid = manifest.rows[i].video_id;
    auto [it, inserted] = by_video.try_emplace(vid);
    if (inserted) video_order.push_back(vid);
    it->second.push_back(i);
  }

  std::vector<bool> chosen(manifest.rows.size(), false);
  for (const auto& vid : video_order) {
    auto& idx = by_video[vid];
    const size_t k = std::min<size_t>(static_cast<size_t>(per_video), idx.size());
    // Partial Fisher-Yates: the first k become the sample.
    for (size_t i = 0; i < k; ++i) {
      const size_t j = i + rng.uniform_int(idx.size() - i);
      std::swap(idx[i], idx[j]);
    }
    for (size_t i = 0; i < k; ++i) chosen[idx[i]] = true;
  }

  Manifest out;
  out.base_dir = manifest.base_dir;
  for (size_t i = 0; i < manifest.rows.size(); ++i)
    if (chosen[i]) out.rows.push_back(manifest.rows[i]);
  return out;
}

}  // namespace fasvit
