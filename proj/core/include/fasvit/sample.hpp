#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fasvit/image.hpp"

namespace fasvit {

enum class Label : int { kLive = 0, kSpoof = 1 };

enum class AttackType : int {
  kNone = 0,
  kPrint = 1,
  kDisplay = 2,
  kSynthPrint = 3,
  kSynthDisplay = 4,
};

std::string to_string(Label l);
std::string to_string(AttackType a);
Label label_from_string(const std::string& s);
AttackType attack_from_string(const std::string& s);

// A live sample must carry AttackType::kNone and vice versa.
inline bool label_attack_consistent(Label l, AttackType a) {
  return (l == Label::kLive) == (a == AttackType::kNone);
}

// Per-patch labels on a G x G grid in raster order, produced by patch mixing
// or synthetic patch labeling.
struct PatchLabels {
  int grid = 0;  // G; labels.size() == G * G
  std::vector<Label> labels;
};

struct Sample {
  std::string id;
  ImageTensor image;
  Label label = Label::kLive;
  AttackType attack = AttackType::kNone;
  std::optional<PatchLabels> patch_labels;

  // Manifest metadata.
  std::string subject_id;
  std::string session;
  std::string device;
  std::string video_id;
  int frame_index = 0;
};

}  // namespace fasvit
