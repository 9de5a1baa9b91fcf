#include "fixtures.hpp"
#include "wsiset/compile.hpp"
#include "wsiset/protocol.hpp"
#include "wsiset/synth.hpp"
#include "wsiset/verify.hpp"

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace wsiset;
using fixture::error_kind;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

bool has_finding(const VerifyReport& r, const std::string& code) {
  for (const auto& f : r.findings)
    if (f.code == code) return true;
  return false;
}

// Small patches keep compiles fast; the arithmetic does not depend on size.
nlohmann::json small_config(const std::string& preset, const fs::path& corpus, const fs::path& out) {
  return {{"preset", preset},
          {"name", "mini"},
          {"corpus", corpus.string()},
          {"out", out.string()},
          {"seed", 5},
          {"sampling", {{"scale_um", 50.0}, {"out_px", 64}, {"stride_um", 25.0}}}};
}

}  // namespace

TEST_CASE("presets share one resolution") {
  for (auto kind : {DatasetKind::Ptcga200, DatasetKind::Pcam200, DatasetKind::SegPanda200}) {
    const CompileConfig cfg = preset_config(kind);
    CHECK(cfg.sampling.scale_um / cfg.sampling.out_px == 0.390625);
    CHECK(cfg.split.fractions[0] + cfg.split.fractions[1] + cfg.split.fractions[2] == doctest::Approx(1.0));
  }
  CHECK(physical_extent_px(200, 0.390625) == 512);
  CHECK(physical_extent_px(400, 0.390625) == 1024);
}

TEST_CASE("config parsing") {
  const CompileConfig cfg = parse_config(
      {{"preset", "ptcga200"},
       {"corpus", "slides"},
       {"seed", 9},
       {"labels", {{"classes", {{{"name", "intestine"}, {"organs", {"colon", "small_intestine"}}}, {{"name", "lung"}}}}}}},
      "/data");
  CHECK(cfg.corpus == fs::path("/data/slides"));
  CHECK(cfg.sampling.patches_per_slide == 500);
  CHECK(cfg.seed == 9);
  CHECK(cfg.split.seed == 9);
  CHECK(cfg.class_names() == std::vector<std::string>{"intestine", "lung"});
  CHECK(cfg.classes[1].organs == std::vector<std::string>{"lung"});

  CHECK(error_kind([] { parse_config({{"bogus", 1}}); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config({{"sampling", {{"mode", "spiral"}}}}); }) == ErrorKind::InvalidConfig);
  CHECK(error_kind([] { parse_config({{"preset", "imagenet"}}); }) == ErrorKind::InvalidConfig);
  CHECK(config_hash(cfg) == config_hash(parse_config({{"preset", "ptcga200"},
                                                      {"corpus", "elsewhere"},
                                                      {"seed", 9},
                                                      {"labels",
                                                       {{"classes",
                                                         {{{"name", "intestine"}, {"organs", {"colon", "small_intestine"}}},
                                                          {{"name", "lung"}}}}}}})));
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("compile, reread, verify") {
  fixture::TempDir dir("compile");
  SynthOptions so;
  so.slides = 10;
  so.size = 1024;
  so.seed = 2;
  synthesize_corpus(dir / "corpus", so);

  nlohmann::json doc = small_config("ptcga200", dir / "corpus", dir / "out");
  doc["sampling"]["patches_per_slide"] = 50;
  doc["split"] = {{"fractions", {0.8, 0.1, 0.1}}};
  doc["labels"] = {{"classes", {{{"name", "breast"}}, {{"name", "colon"}}, {{"name", "kidney"}}, {{"name", "lung"}}}}};
  CompileConfig cfg = parse_config(doc);
  const CompileResult r = compile(cfg);

  const auto& m = r.manifest;
  CHECK(m.summary.at("train").records == 400);
  CHECK(m.summary.at("val").records == 50);
  CHECK(m.summary.at("test").records == 50);
  CHECK(m.summary.at("train").slides == 8);
  CHECK(m.summary.at("val").slides == 1);
  CHECK(m.summary.at("test").slides == 1);
  CHECK(m.mpp == 50.0 / 64);
  CHECK(m.pixel_stats.has_value());
  CHECK(recount(m.records, m.class_names) == m.summary);

  std::map<std::string, std::set<Split>> splits_of;
  for (const auto& rec : m.records) splits_of[rec.record.slide_id].insert(rec.record.split);
  for (const auto& [id, s] : splits_of) CHECK(s.size() == 1);

  const DatasetManifest back = read_manifest(r.manifest_path);
  CHECK(back.records.size() == 500);
  CHECK(back.summary == m.summary);
  CHECK(back.config_hash == m.config_hash);
  CHECK(back.records[17].record.x0_um == m.records[17].record.x0_um);
  CHECK(back.records[17].path == m.records[17].path);

  const VerifyReport clean = verify(r.manifest_path, true);
  CHECK(clean.ok());
  CHECK(clean.records_checked == 500);

  std::ostringstream csv;
  write_manifest_csv(csv, back);
  const std::string rows = csv.str();
  CHECK(std::count(rows.begin(), rows.end(), '\n') == 501);

  // Rerun and a different worker count give the same bytes.
  const std::string first = slurp(r.manifest_path);
  CHECK(error_kind([&] { compile(cfg); }) == ErrorKind::IoError);
  cfg.jobs = 3;
  CHECK(slurp(compile(cfg, true).manifest_path) == first);

  SUBCASE("slide in two splits") {
    DatasetManifest bad = back;
    const std::string victim = bad.records.front().record.slide_id;
    bad.records.front().record.split = bad.records.front().record.split == Split::Train ? Split::Val : Split::Train;
    bad.summary = recount(bad.records, bad.class_names);
    write_manifest(r.manifest_path, bad);
    const VerifyReport rep = verify(r.manifest_path);
    CHECK(has_finding(rep, "slide in two splits"));
  }
  SUBCASE("missing file") {
    fs::remove(r.dataset_dir / back.records[3].path);
    CHECK(has_finding(verify(r.manifest_path), "missing file"));
  }
  SUBCASE("hash mismatch") {
    std::ofstream(r.dataset_dir / back.records[4].path, std::ios::binary | std::ios::app) << '\0';
    CHECK(verify(r.manifest_path).ok());
    CHECK(has_finding(verify(r.manifest_path, true), "hash mismatch"));
  }
}

TEST_CASE("camelyon-style corpus compiles with balanced classes") {
  fixture::TempDir dir("camelyon");
  SynthOptions so;
  so.kind = SynthKind::Camelyon;
  so.slides = 8;
  so.size = 1024;
  synthesize_corpus(dir / "corpus", so);
  const CompileResult r = compile(parse_config(small_config("pcam200", dir / "corpus", dir / "out")));
  const auto& m = r.manifest;
  CHECK(m.rebalanced);
  for (const auto& [split, s] : m.summary) {
    if (s.records == 0) continue;
    std::set<std::uint64_t> sizes;
    for (const auto& [name, n] : s.classes) sizes.insert(n);
    CHECK(sizes.size() == 1);
  }
  for (const auto& rec : m.records)
    CHECK((rec.record.split == Split::Test) == (rec.record.metadata.at("origin") == "test"));
  CHECK(verify(r.manifest_path).ok());
}

TEST_CASE("panda-style corpus compiles with masks") {
  fixture::TempDir dir("panda");
  SynthOptions so;
  so.kind = SynthKind::Panda;
  so.slides = 12;
  so.size = 1024;
  synthesize_corpus(dir / "corpus", so);
  const CompileResult r = compile(parse_config(small_config("segpanda200", dir / "corpus", dir / "out")));
  const auto& m = r.manifest;
  CHECK(m.segmentation);
  CHECK(!m.records.empty());
  for (const auto& rec : m.records) {
    CHECK(rec.record.metadata.at("provider") == "radboud");
    CHECK(rec.record.mask_ref.has_value());
    CHECK(fs::exists(r.dataset_dir / *rec.record.mask_ref));
  }
  CHECK(verify(r.manifest_path, true).ok());
}

TEST_CASE("training protocol documents") {
  const auto ft = protocol_document("finetune-default");
  CHECK(ft.at("optimizer").at("name") == "sgd");
  CHECK(ft.at("optimizer").at("momentum") == 0.9);
  CHECK(ft.at("optimizer").at("nesterov") == false);
  CHECK(ft.at("batch_size") == 512);
  CHECK(ft.at("lr") == 0.05);

  const auto rn = protocol_document("pretrain-resnet50");
  CHECK(rn.at("epochs") == 60);
  CHECK(rn.at("image_size") == 224);
  CHECK(rn.at("weight_decay") == 5e-5);
  CHECK(rn.at("base_lr") == 5e-4);
  CHECK(rn.at("warmup_epochs") == 10);
  CHECK(std::fabs(rn.at("peak_lr").get<double>() - 8e-3) <= 1e-12);
  const auto& table = rn.at("lr_table");
  CHECK(table.front().at("lr") == 0.0);
  CHECK(table.back().at("step") == rn.at("total_steps"));

  CHECK(error_kind([] { protocol_document("pretrain-alexnet"); }) == ErrorKind::UnknownPreset);
  CHECK(protocol_names().size() == 7);
}
