#include "wsiset/protocol.hpp"

#include "wsiset/error.hpp"
#include "wsiset/vit.hpp"

#include <map>

namespace wsiset {
using nlohmann::json;

namespace {

struct PretrainRow {
  int epochs;
  int image_size;
  double weight_decay;
  double base_lr;
  int warmup_epochs;
};

// Supervised scratch pretraining hyperparameters, AdamW(0.9, 0.999).
const std::map<std::string, PretrainRow>& pretrain_rows() {
  static const std::map<std::string, PretrainRow> rows = {
      {"pretrain-resnet18", {60, 224, 5e-5, 0.001, 10}},
      {"pretrain-resnet50", {60, 224, 5e-5, 5e-4, 10}},
      {"pretrain-inceptionv3", {60, 299, 5e-5, 1e-4, 10}},
      {"pretrain-efficientnet-b3", {60, 300, 5e-5, 1e-4, 10}},
      {"pretrain-vit-s16", {80, 224, 0.03, 1e-4, 15}},
      {"pretrain-vit-b32", {100, 224, 0.03, 1e-4, 20}},
  };
  return rows;
}

constexpr long long kPtcga200TrainPatches = 4945500;

json schedule_table(long long total, long long warmup, double peak, long long every) {
  json table = json::array();
  for (long long s = 0; s <= total; s += every) table.push_back({{"step", s}, {"lr", cosine_lr(s, total, warmup, peak)}});
  if (total % every != 0) table.push_back({{"step", total}, {"lr", cosine_lr(total, total, warmup, peak)}});
  return table;
}

}  // namespace

std::vector<std::string> protocol_names() {
  std::vector<std::string> names{"finetune-default"};
  for (const auto& [name, row] : pretrain_rows()) names.push_back(name);
  return names;
}

json protocol_document(const std::string& preset, const ProtocolOptions& opt) {
  if (opt.batch_size < 1 || opt.finetune_steps < 1 || opt.every < 0 || opt.steps_per_epoch < 0)
    throw Error(ErrorKind::InvalidSchedule, "protocol options must be positive");
  if (preset == "finetune-default") {
    const long long total = opt.finetune_steps;
    const long long every = opt.every > 0 ? opt.every : 10;
    return {{"preset", preset},
            {"task", "fine-tuning (whole model)"},
            {"optimizer", {{"name", "sgd"}, {"momentum", 0.9}, {"nesterov", false}, {"weight_decay", 0.0}}},
            {"batch_size", 512},
            {"lr", 0.05},
            {"schedule", "cosine"},
            {"warmup_steps", 0},
            {"total_steps", total},
            {"image_size", {224, 384}},
            {"pos_embed_resize", "bicubic"},
            {"normalization",
             {{"pretrained", "pretraining dataset mean/std"}, {"random_init", {{"mean", {0.5, 0.5, 0.5}}, {"std", {0.5, 0.5, 0.5}}}}}},
            {"lr_table", schedule_table(total, 0, 0.05, every)}};
  }
  const auto it = pretrain_rows().find(preset);
  if (it == pretrain_rows().end()) throw Error(ErrorKind::UnknownPreset, preset);
  const PretrainRow& row = it->second;
  const long long steps_per_epoch =
      opt.steps_per_epoch > 0 ? opt.steps_per_epoch : (kPtcga200TrainPatches + opt.batch_size - 1) / opt.batch_size;
  const long long total = steps_per_epoch * row.epochs;
  const long long warmup = steps_per_epoch * row.warmup_epochs;
  const double peak = row.base_lr * static_cast<double>(opt.batch_size) / 256.0;
  const long long every = opt.every > 0 ? opt.every : steps_per_epoch;
  return {{"preset", preset},
          {"task", "supervised scratch pretraining, 20-class organ classification"},
          {"optimizer", {{"name", "adamw"}, {"beta1", 0.9}, {"beta2", 0.999}, {"weight_decay", row.weight_decay}}},
          {"batch_size", opt.batch_size},
          {"epochs", row.epochs},
          {"image_size", row.image_size},
          {"weight_decay", row.weight_decay},
          {"base_lr", row.base_lr},
          {"peak_lr", peak},
          {"warmup_epochs", row.warmup_epochs},
          {"steps_per_epoch", steps_per_epoch},
          {"warmup_steps", warmup},
          {"total_steps", total},
          {"schedule", "linear warmup from 0, cosine to 0"},
          {"lr_table", schedule_table(total, warmup, peak, every)}};
}

}  // namespace wsiset
