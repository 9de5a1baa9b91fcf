#include "wsiset/split.hpp"

#include "wsiset/error.hpp"
#include "wsiset/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace wsiset {

std::string_view to_string(SplitStrategy strategy) {
  switch (strategy) {
    case SplitStrategy::SlideLevel: return "slide_level";
    case SplitStrategy::StratifiedIsup: return "stratified_isup";
    case SplitStrategy::StratifiedOrgan: return "stratified_organ";
    case SplitStrategy::SourceConstrained: return "source_constrained";
  }
  return "slide_level";
}

SplitStrategy parse_split_strategy(std::string_view name) {
  for (auto s : {SplitStrategy::SlideLevel, SplitStrategy::StratifiedIsup, SplitStrategy::StratifiedOrgan,
                 SplitStrategy::SourceConstrained})
    if (to_string(s) == name) return s;
  throw Error(ErrorKind::InvalidConfig, "unknown split strategy '" + std::string(name) + "'");
}

void SplitPlan::validate() const {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw Error(ErrorKind::InvalidConfig, "split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorKind::InvalidConfig, "split fractions must sum to 1");
}

std::array<int, 3> largest_remainder(const std::array<double, 3>& fractions, int n) {
  std::array<int, 3> counts{};
  std::array<double, 3> rest{};
  int assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fractions[i] * n;
    counts[i] = static_cast<int>(std::floor(exact));
    rest[i] = exact - counts[i];
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rest[a] > rest[b]; });
  for (int k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++counts[order[k]];
  return counts;
}

namespace {

constexpr Split kSplits[3] = {Split::Train, Split::Val, Split::Test};

std::vector<std::string> sorted_ids(const std::vector<SlideInfo>& slides) {
  std::vector<std::string> ids;
  ids.reserve(slides.size());
  for (const auto& s : slides) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw Error(ErrorKind::InvalidConfig, "duplicate slide id in corpus");
  return ids;
}

void assign(std::vector<std::string> ids, const std::array<double, 3>& fractions, std::uint64_t key,
            SplitMap& out) {
  Stream rng(key);
  rng.shuffle(ids);
  const auto counts = largest_remainder(fractions, static_cast<int>(ids.size()));
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s)
    for (int k = 0; k < counts[s]; ++k) out[ids[pos++]] = kSplits[s];
}

const std::string* find_meta(const SlideInfo& s, const std::string& key) {
  const auto it = s.metadata.find(key);
  return it == s.metadata.end() ? nullptr : &it->second;
}

}  // namespace

SplitMap slide_level_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan) {
  plan.validate();
  if (slides.empty()) throw Error(ErrorKind::EmptyCorpus, "no slides to split");
  SplitMap out;
  assign(sorted_ids(slides), plan.fractions, derive_key(plan.seed, "split"), out);
  return out;
}

SplitMap stratified_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan, const std::string& key) {
  plan.validate();
  if (slides.empty()) throw Error(ErrorKind::EmptyCorpus, "no slides to split");
  sorted_ids(slides);
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& s : slides) {
    const std::string* v = find_meta(s, key);
    if (!v || v->empty())
      throw Error(key == "isup" ? ErrorKind::MissingGrade : ErrorKind::CorruptMetadata, s.id + ": missing " + key);
    strata[*v].push_back(s.id);
  }
  SplitMap out;
  for (auto& [value, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    assign(std::move(ids), plan.fractions, derive_key(plan.seed, "split/" + key + "/" + value), out);
  }
  return out;
}

SplitMap stratified_isup_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan) {
  return stratified_split(slides, plan, "isup");
}

SplitResult source_constrained_split(const std::vector<SlideInfo>& slides, const SplitPlan& plan) {
  plan.validate();
  if (slides.empty()) throw Error(ErrorKind::EmptyCorpus, "no slides to split");
  sorted_ids(slides);
  std::vector<std::string> train_origin;
  SplitResult result;
  for (const auto& s : slides) {
    const std::string* origin = find_meta(s, "origin");
    if (!origin || (*origin != "train" && *origin != "test"))
      throw Error(ErrorKind::MissingOrigin, s.id + ": origin must be train or test");
    if (*origin == "test")
      result.assignment[s.id] = Split::Test;
    else
      train_origin.push_back(s.id);
  }
  if (result.assignment.empty()) result.warnings.push_back("no origin=test slides: test split is empty");
  const double tv = plan.fractions[0] + plan.fractions[1];
  const std::array<double, 3> renorm =
      tv > 0.0 ? std::array<double, 3>{plan.fractions[0] / tv, plan.fractions[1] / tv, 0.0}
               : std::array<double, 3>{1.0, 0.0, 0.0};
  std::sort(train_origin.begin(), train_origin.end());
  assign(std::move(train_origin), renorm, derive_key(plan.seed, "split/origin"), result.assignment);
  return result;
}

SplitResult split_slides(const std::vector<SlideInfo>& slides, const SplitPlan& plan) {
  switch (plan.strategy) {
    case SplitStrategy::SlideLevel: return {slide_level_split(slides, plan), {}};
    case SplitStrategy::StratifiedIsup: return {stratified_isup_split(slides, plan), {}};
    case SplitStrategy::StratifiedOrgan: return {stratified_split(slides, plan, "organ"), {}};
    case SplitStrategy::SourceConstrained: return source_constrained_split(slides, plan);
  }
  return {};
}

std::vector<bool> rebalance_keep_mask(const std::vector<PatchRecord>& records, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label) throw Error(ErrorKind::InvalidConfig, "rebalance needs class-labelled records");
    by_class[*records[i].label].push_back(i);
  }
  std::vector<bool> keep(records.size(), true);
  if (by_class.empty()) return keep;
  std::size_t min_count = records.size();
  for (const auto& [label, idx] : by_class) min_count = std::min(min_count, idx.size());
  for (auto& [label, idx] : by_class) {
    if (idx.size() == min_count) continue;
    Stream rng(derive_key(seed, "rebalance/" + std::to_string(label)));
    rng.shuffle(idx);
    for (std::size_t k = min_count; k < idx.size(); ++k) keep[idx[k]] = false;
  }
  return keep;
}

std::vector<PatchRecord> rebalance_classes(const std::vector<PatchRecord>& records, std::uint64_t seed) {
  const auto keep = rebalance_keep_mask(records, seed);
  std::vector<PatchRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

std::vector<PatchRecord> rebalance_per_split(const std::vector<PatchRecord>& records, std::uint64_t seed) {
  std::map<Split, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < records.size(); ++i) members[records[i].split].push_back(i);
  std::vector<bool> keep(records.size(), false);
  for (const auto& [split, idx] : members) {
    std::vector<PatchRecord> part;
    part.reserve(idx.size());
    for (std::size_t i : idx) part.push_back(records[i]);
    const auto k = rebalance_keep_mask(part, derive_key(seed, to_string(split)));
    for (std::size_t j = 0; j < idx.size(); ++j) keep[idx[j]] = k[j];
  }
  std::vector<PatchRecord> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

std::vector<PatchRecord> fraction_subset(const std::vector<PatchRecord>& records, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) throw Error(ErrorKind::InvalidConfig, "fraction must lie in (0, 1]");
  std::set<std::string> unique;
  for (const auto& r : records) unique.insert(r.slide_id);
  std::vector<std::string> ids(unique.begin(), unique.end());
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
  Stream rng(derive_key(seed, "fraction"));
  rng.shuffle(ids);
  ids.resize(std::min(k, ids.size()));
  const std::set<std::string> chosen(ids.begin(), ids.end());
  std::vector<PatchRecord> out;
  for (const auto& r : records)
    if (chosen.count(r.slide_id)) out.push_back(r);
  return out;
}

void write_split_csv(std::ostream& out, const SplitMap& assignment) {
  out << "slide_id,split\n";
  for (const auto& [id, split] : assignment) out << id << ',' << to_string(split) << '\n';
}

}  // namespace wsiset
