#include "wsiset/vit.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace wsiset {

int feature_map_size(int input_px, int patch_px) {
  if (input_px < 1 || patch_px < 1 || input_px % patch_px != 0)
    throw Error(ErrorKind::NotDivisible,
                std::to_string(input_px) + " px is not a multiple of patch " + std::to_string(patch_px));
  return input_px / patch_px;
}

int validate_layer_tap(std::optional<int> k, int depth) {
  if (depth < 1) throw Error(ErrorKind::OutOfRange, "depth must be positive");
  const int layer = k.value_or(depth);
  if (layer < 1 || layer > depth)
    throw Error(ErrorKind::OutOfRange, "layer " + std::to_string(layer) + " outside 1.." + std::to_string(depth));
  return layer;
}

double cosine_lr(long long step, long long total_steps, long long warmup_steps, double peak) {
  if (total_steps < 1 || warmup_steps < 0 || warmup_steps >= total_steps || step < 0 || step > total_steps)
    throw Error(ErrorKind::InvalidSchedule, "need 0 <= step <= total and 0 <= warmup < total");
  if (step < warmup_steps) return peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return std::max(0.0, peak * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
}

double lr_at(long long step, long long total_steps, long long warmup_steps, double base_lr, double batch_size) {
  if (!(base_lr >= 0.0) || !(batch_size > 0.0)) throw Error(ErrorKind::InvalidSchedule, "bad base lr or batch size");
  return cosine_lr(step, total_steps, warmup_steps, base_lr * batch_size / 256.0);
}

namespace {


void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error(ErrorKind::DecodeError, "truncated positional table");
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
}

constexpr char kMagic[4] = {'P', 'E', 'M', 'B'};
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_pos_embed(const std::filesystem::path& path, const PosEmbed<float>& pe) {
  pe.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(pe.rows()));
  put_u32(out, static_cast<std::uint32_t>(pe.hidden()));
  put_u32(out, pe.has_cls ? 1u : 0u);
  put_u32(out, static_cast<std::uint32_t>(pe.grid_h));
  put_u32(out, static_cast<std::uint32_t>(pe.grid_w));
  for (Eigen::Index r = 0; r < pe.table.rows(); ++r)
    for (Eigen::Index c = 0; c < pe.table.cols(); ++c) put_u32(out, std::bit_cast<std::uint32_t>(pe.table(r, c)));
  if (!out) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

PosEmbed<float> read_pos_embed(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw Error(ErrorKind::DecodeError, path.string() + ": not a positional table");
  if (get_u32(in) != kVersion) throw Error(ErrorKind::DecodeError, path.string() + ": unsupported version");
  PosEmbed<float> pe;
  const std::uint32_t rows = get_u32(in);
  const std::uint32_t hidden = get_u32(in);
  pe.has_cls = get_u32(in) != 0;
  pe.grid_h = static_cast<int>(get_u32(in));
  pe.grid_w = static_cast<int>(get_u32(in));
  pe.table.resize(rows, hidden);
  for (Eigen::Index r = 0; r < pe.table.rows(); ++r)
    for (Eigen::Index c = 0; c < pe.table.cols(); ++c) pe.table(r, c) = std::bit_cast<float>(get_u32(in));
  pe.validate();
  return pe;
}

}  // namespace wsiset
