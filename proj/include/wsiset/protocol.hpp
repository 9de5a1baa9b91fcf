#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace wsiset {

struct ProtocolOptions {
  /// Pretraining batch size ("4k"); read as 4096 unless overridden.
  long long batch_size = 4096;
  /// Optimizer steps per epoch; 0 derives it from the PTCGA200 training split
  /// (4,945,500 patches) and the batch size.
  long long steps_per_epoch = 0;
  /// Total steps for fine-tuning presets, which are iteration-based.
  long long finetune_steps = 1000;
  /// Schedule sampling stride in steps; 0 samples once per epoch (pretraining)
  /// or every 10 steps (fine-tuning). 1 emits every step.
  long long every = 0;
};

std::vector<std::string> protocol_names();

/// Machine-readable training protocol: hyperparameters plus a sampled
/// learning-rate table. Throws UnknownPreset.
nlohmann::json protocol_document(const std::string& preset, const ProtocolOptions& options = {});

}  // namespace wsiset
