#pragma once

#include "wsiset/slide.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace wsiset {

enum class Split { Unassigned, Train, Val, Test };

std::string_view to_string(Split split);
/// Accepts "train", "val", "test", "unassigned"; throws InvalidConfig.
Split parse_split(std::string_view name);

/// One extracted patch. Classification datasets set `label`; segmentation
/// datasets set `mask_ref` instead.
struct PatchRecord {
  std::string slide_id;
  int index = 0;  ///< ordinal within the slide's sampled sequence
  double x0_um = 0.0;
  double y0_um = 0.0;
  double scale_um = 0.0;
  int out_px = 0;
  std::optional<int> label;
  std::string label_name;
  std::optional<std::string> mask_ref;
  Split split = Split::Unassigned;
  Metadata metadata;
  double tissue_fraction = 0.0;
};

/// Metadata keys copied from the slide onto each record.
inline constexpr std::string_view kRecordMetadataKeys[] = {"organ", "isup", "provider", "slide_type", "origin"};

}  // namespace wsiset
