#include "wsiset/manifest.hpp"

#include "wsiset/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace wsiset {
namespace fs = std::filesystem;
using nlohmann::json;

std::map<std::string, SplitSummary> recount(const std::vector<ManifestRecord>& records,
                                            const std::vector<std::string>& class_names) {
  std::map<std::string, SplitSummary> out;
  std::map<std::string, std::set<std::string>> slides;
  for (const auto& r : records) {
    const std::string split(to_string(r.record.split));
    auto& s = out[split];
    ++s.records;
    slides[split].insert(r.record.slide_id);
    if (r.record.label) {
      const int l = *r.record.label;
      const std::string name =
          l >= 0 && l < static_cast<int>(class_names.size()) ? class_names[l] : std::to_string(l);
      ++s.classes[name];
    }
  }
  for (auto& [split, s] : out) s.slides = slides[split].size();
  return out;
}

namespace {

json stats_json(const std::optional<ChannelStats>& s) {
  if (!s) return nullptr;
  return {{"mean", {s->mean[0], s->mean[1], s->mean[2]}},
          {"std", {s->std[0], s->std[1], s->std[2]}},
          {"degenerate", s->degenerate}};
}

std::optional<ChannelStats> stats_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  ChannelStats s;
  for (int c = 0; c < 3; ++c) {
    s.mean[c] = j.at("mean").at(c).get<double>();
    s.std[c] = j.at("std").at(c).get<double>();
  }
  s.degenerate = j.value("degenerate", false);
  return s;
}

}  // namespace

json header_json(const DatasetManifest& m) {
  json summary = json::object();
  for (const auto& [split, s] : m.summary)
    summary[split] = {{"records", s.records}, {"slides", s.slides}, {"classes", s.classes}};
  return {{"format", "wsiset-manifest"},
          {"schema_version", kManifestSchemaVersion},
          {"name", m.name},
          {"kind", to_string(m.kind)},
          {"scale_um", m.scale_um},
          {"out_px", m.out_px},
          {"mpp", m.mpp},
          {"segmentation", m.segmentation},
          {"rebalanced", m.rebalanced},
          {"tissue_tau", m.tissue_tau},
          {"class_names", m.class_names},
          {"seed", m.seed},
          {"tool_version", m.tool_version},
          {"config_hash", m.config_hash},
          {"config", m.config},
          {"summary", summary},
          {"stats",
           {{"split", "train"},
            {"pixels", m.stats_pixels},
            {"per_pixel", stats_json(m.pixel_stats)},
            {"per_image_mean", stats_json(m.image_mean_stats)},
            {"reference_ptcga200",
             {{"mean", {kPtcga200ReferenceMean[0], kPtcga200ReferenceMean[1], kPtcga200ReferenceMean[2]}},
              {"std", {kPtcga200ReferenceStd[0], kPtcga200ReferenceStd[1], kPtcga200ReferenceStd[2]}}}}}},
          {"warnings", m.warnings},
          {"record_count", m.records.size()}};
}

json record_json(const ManifestRecord& mr) {
  const PatchRecord& r = mr.record;
  json j = {{"slide_id", r.slide_id},
            {"index", r.index},
            {"x0_um", r.x0_um},
            {"y0_um", r.y0_um},
            {"scale_um", r.scale_um},
            {"out_px", r.out_px},
            {"split", to_string(r.split)},
            {"tissue_fraction", r.tissue_fraction},
            {"metadata", r.metadata},
            {"path", mr.path},
            {"sha256", mr.sha256}};
  if (r.label) {
    j["label"] = *r.label;
    j["label_name"] = r.label_name;
  }
  if (r.mask_ref) {
    j["mask"] = *r.mask_ref;
    j["mask_sha256"] = mr.mask_sha256;
  }
  return j;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord mr;
  PatchRecord& r = mr.record;
  r.slide_id = j.at("slide_id").get<std::string>();
  r.index = j.at("index").get<int>();
  r.x0_um = j.at("x0_um").get<double>();
  r.y0_um = j.at("y0_um").get<double>();
  r.scale_um = j.at("scale_um").get<double>();
  r.out_px = j.at("out_px").get<int>();
  r.split = parse_split(j.at("split").get<std::string>());
  r.tissue_fraction = j.value("tissue_fraction", 0.0);
  if (j.contains("metadata")) r.metadata = j.at("metadata").get<Metadata>();
  if (j.contains("label")) {
    r.label = j.at("label").get<int>();
    r.label_name = j.value("label_name", std::string());
  }
  if (j.contains("mask")) {
    r.mask_ref = j.at("mask").get<std::string>();
    mr.mask_sha256 = j.value("mask_sha256", std::string());
  }
  mr.path = j.at("path").get<std::string>();
  mr.sha256 = j.value("sha256", std::string());
  return mr;
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + tmp.string());
    out << header_json(m).dump() << '\n';
    for (const auto& r : m.records) out << record_json(r).dump() << '\n';
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot read manifest " + path.string());
  DatasetManifest m;
  std::string line;
  try {
    if (!std::getline(in, line)) throw Error(ErrorKind::DecodeError, path.string() + ": empty manifest");
    const json h = json::parse(line);
    if (h.value("format", std::string()) != "wsiset-manifest")
      throw Error(ErrorKind::DecodeError, path.string() + ": not a dataset manifest");
    if (h.at("schema_version").get<int>() > kManifestSchemaVersion)
      throw Error(ErrorKind::DecodeError, path.string() + ": newer schema version");
    m.name = h.at("name").get<std::string>();
    m.kind = parse_dataset_kind(h.at("kind").get<std::string>());
    m.scale_um = h.at("scale_um").get<double>();
    m.out_px = h.at("out_px").get<int>();
    m.mpp = h.at("mpp").get<double>();
    m.segmentation = h.at("segmentation").get<bool>();
    m.rebalanced = h.at("rebalanced").get<bool>();
    m.tissue_tau = h.value("tissue_tau", 0.0);
    m.class_names = h.at("class_names").get<std::vector<std::string>>();
    m.seed = h.at("seed").get<std::uint64_t>();
    m.tool_version = h.at("tool_version").get<std::string>();
    m.config_hash = h.at("config_hash").get<std::string>();
    m.config = h.value("config", json::object());
    for (const auto& [split, s] : h.at("summary").items()) {
      SplitSummary sum;
      sum.records = s.at("records").get<std::uint64_t>();
      sum.slides = s.at("slides").get<std::uint64_t>();
      sum.classes = s.at("classes").get<std::map<std::string, std::uint64_t>>();
      m.summary[split] = sum;
    }
    const auto& st = h.at("stats");
    m.stats_pixels = st.value("pixels", std::uint64_t{0});
    m.pixel_stats = stats_from_json(st.at("per_pixel"));
    m.image_mean_stats = stats_from_json(st.at("per_image_mean"));
    m.warnings = h.value("warnings", std::vector<std::string>{});
    while (std::getline(in, line))
      if (!line.empty()) m.records.push_back(record_from_json(json::parse(line)));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::DecodeError, path.string() + ": " + e.what());
  }
  return m;
}

void write_manifest_csv(std::ostream& out, const DatasetManifest& m) {
  out << "slide_id,index,x0_um,y0_um,scale_um,out_px,split,label,label_name,path,mask\n";
  for (const auto& mr : m.records) {
    const auto& r = mr.record;
    out << r.slide_id << ',' << r.index << ',' << json(r.x0_um).dump() << ',' << json(r.y0_um).dump() << ','
        << json(r.scale_um).dump() << ',' << r.out_px << ',' << to_string(r.split) << ','
        << (r.label ? std::to_string(*r.label) : "") << ',' << r.label_name << ',' << mr.path << ','
        << r.mask_ref.value_or("") << '\n';
  }
}

}  // namespace wsiset
