#pragma once

#include "wsiset/record.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace wsiset {

enum class SplitStrategy { SlideLevel, StratifiedIsup, StratifiedOrgan, SourceConstrained };

std::string_view to_string(SplitStrategy strategy);
SplitStrategy parse_split_strategy(std::string_view name);

struct SplitPlan {
  std::array<double, 3> fractions{0.8, 0.1, 0.1};  ///< train, val, test
  SplitStrategy strategy = SplitStrategy::SlideLevel;
  std::uint64_t seed = 0;

  /// Fractions non-negative and summing to 1 within 1e-9.
  void validate() const;
};

struct SlideInfo {
  std::string id;
  Metadata metadata;
};

using SplitMap = std::map<std::string, Split>;

struct SplitResult {
  SplitMap assignment;
  std::vector<std::string> warnings;
};

/// Hamilton apportionment of n items; leftover units go to the largest
/// fractional parts, ties to the earlier split.
std::array<int, 3> largest_remainder(const std::array<double, 3>& fractions, int n);

/// Slides sorted by id, shuffled by the plan seed, cut by cumulative counts.
SplitMap slide_level_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan);

/// Independent slide-level split inside each value of `key`.
SplitMap stratified_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan, const std::string& key);

/// Stratifies on the "isup" grade; throws MissingGrade for ungraded slides.
SplitMap stratified_isup_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan);

/// origin=test slides go to test; origin=train slides are split between train
/// and val with the renormalized train/val fractions.
SplitResult source_constrained_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan);

/// Dispatches on plan.strategy.
SplitResult split_slides(const std::vector<SlideInfo>& slides, const SplitPlan& plan);

/// keep[i] is false for records discarded to bring every class down to the
/// smallest class count.
std::vector<bool> rebalance_keep_mask(const std::vector<PatchRecord>& records, std::uint64_t seed);

/// Randomly discards records so every class has the minimum class count;
/// survivors keep their relative order.
std::vector<PatchRecord> rebalance_classes(const std::vector<PatchRecord>& records, std::uint64_t seed);

/// rebalance_classes applied to each split separately, each with its own
/// stream derived from `seed` and the split name.
std::vector<PatchRecord> rebalance_per_split(const std::vector<PatchRecord>& records, std::uint64_t seed);

/// All records of ceil(fraction * #slides) randomly chosen slides.
std::vector<PatchRecord> fraction_subset(const std::vector<PatchRecord>& records, double fraction, std::uint64_t seed);

/// `slide_id,split` CSV with a header row.
void write_split_csv(std::ostream& out, const SplitMap& assignment);

}  // namespace wsiset
