#include "wsiset/augment.hpp"

namespace wsiset {

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::Ptcga200: return "ptcga200";
    case DatasetKind::Pcam200: return "pcam200";
    case DatasetKind::SegPanda200: return "segpanda200";
    case DatasetKind::Other: break;
  }
  return "other";
}

DatasetKind parse_dataset_kind(std::string_view name) {
  for (auto k : {DatasetKind::Ptcga200, DatasetKind::Pcam200, DatasetKind::SegPanda200, DatasetKind::Other})
    if (to_string(k) == name) return k;
  throw Error(ErrorKind::InvalidConfig, "unknown dataset kind '" + std::string(name) + "'");
}

}  // namespace wsiset
