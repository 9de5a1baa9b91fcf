#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace wsiset {

struct Finding {
  std::string code;  ///< short stable identifier, e.g. "missing file"
  std::string detail;
};

struct VerifyReport {
  std::vector<Finding> findings;
  std::size_t records_checked = 0;

  bool ok() const { return findings.empty(); }
};

/// Re-checks a compiled dataset against its manifest: summary counts against a
/// recount, slide-level split integrity, file presence, MPP consistency, class
/// balance when rebalanced, label and mask value ranges, and optionally the
/// content hashes.
VerifyReport verify(const std::filesystem::path& manifest_path, bool check_hashes = false);

}  // namespace wsiset
