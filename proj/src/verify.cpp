#include "wsiset/verify.hpp"

#include "wsiset/config.hpp"
#include "wsiset/error.hpp"
#include "wsiset/manifest.hpp"
#include "wsiset/png_io.hpp"

#include <cmath>
#include <map>
#include <set>

namespace wsiset {
namespace fs = std::filesystem;

VerifyReport verify(const fs::path& manifest_path, bool check_hashes) {
  const DatasetManifest m = read_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  VerifyReport report;
  auto find = [&](std::string code, std::string detail) { report.findings.push_back({std::move(code), std::move(detail)}); };

  if (m.out_px < 1 || std::abs(m.mpp - m.scale_um / m.out_px) > 1e-12 * m.mpp)
    find("mpp mismatch", "header mpp " + std::to_string(m.mpp) + " != scale_um / out_px");

  const auto counted = recount(m.records, m.class_names);
  if (counted != m.summary) find("count mismatch", "summary counts differ from a recount of the record rows");

  std::map<std::string, std::set<std::string>> splits_of_slide;
  std::map<std::string, std::map<int, std::uint64_t>> class_counts;  // by split
  std::set<std::string> paths;
  for (const auto& mr : m.records) {
    const PatchRecord& r = mr.record;
    const std::string where = r.slide_id + "#" + std::to_string(r.index);
    ++report.records_checked;
    splits_of_slide[r.slide_id].insert(std::string(to_string(r.split)));
    if (r.split == Split::Unassigned) find("unassigned split", where);
    if (r.scale_um != m.scale_um || r.out_px != m.out_px) find("geometry mismatch", where);
    if (r.tissue_fraction < m.tissue_tau) find("below tissue threshold", where);
    if (!paths.insert(mr.path).second) find("duplicate path", mr.path);
    if (m.segmentation) {
      if (!r.mask_ref || r.label) find("label kind mismatch", where + ": segmentation records carry a mask only");
    } else if (!r.label || r.mask_ref) {
      find("label kind mismatch", where + ": classification records carry a class label only");
    } else if (*r.label < 0 || *r.label >= static_cast<int>(m.class_names.size())) {
      find("undeclared label", where + ": label " + std::to_string(*r.label));
    } else {
      ++class_counts[std::string(to_string(r.split))][*r.label];
    }

    const fs::path image = root / mr.path;
    if (!fs::exists(image)) {
      find("missing file", mr.path);
    } else if (check_hashes && sha256_file(image) != mr.sha256) {
      find("hash mismatch", mr.path);
    }
    if (r.mask_ref) {
      const fs::path mask = root / *r.mask_ref;
      if (!fs::exists(mask)) {
        find("missing file", *r.mask_ref);
      } else {
        if (check_hashes && sha256_file(mask) != mr.mask_sha256) find("hash mismatch", *r.mask_ref);
        try {
          const Raster8 px = read_png(mask);
          if (px.channels != 1 || (px.data.cast<int>() >= static_cast<int>(m.class_names.size())).any())
            find("undeclared mask label", *r.mask_ref);
        } catch (const Error& e) {
          find("unreadable mask", *r.mask_ref + ": " + e.what());
        }
      }
    }
  }
  for (const auto& [slide, splits] : splits_of_slide)
    if (splits.size() > 1) find("slide in two splits", slide);
  if (m.rebalanced)
    for (const auto& [split, counts] : class_counts) {
      std::uint64_t lo = ~std::uint64_t(0);
      std::uint64_t hi = 0;
      for (const auto& [label, n] : counts) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      if (lo != hi) find("unbalanced classes", split + ": rebalanced split has unequal class counts");
    }
  return report;
}

}  // namespace wsiset
