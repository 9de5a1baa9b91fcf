#pragma once

#include "wsiset/error.hpp"
#include "wsiset/resample.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>

namespace wsiset {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Shape of a ViT token sequence laid over a patch grid.
struct TokenGrid {
  int seq_len = 0;
  int hidden = 0;
  int grid_h = 0;
  int grid_w = 0;
  bool has_cls = true;

  static TokenGrid make(int grid_h, int grid_w, int hidden, bool has_cls) {
    return {grid_h * grid_w + (has_cls ? 1 : 0), hidden, grid_h, grid_w, has_cls};
  }

  int tokens() const { return grid_h * grid_w; }

  void validate() const {
    if (grid_h < 1 || grid_w < 1 || hidden < 1 || seq_len != tokens() + (has_cls ? 1 : 0))
      throw Error(ErrorKind::ShapeMismatch, "sequence length " + std::to_string(seq_len) + " does not match grid " +
                                                std::to_string(grid_h) + "x" + std::to_string(grid_w) +
                                                (has_cls ? " + CLS" : ""));
  }
};

/// Channel-major feature map: data(c, r * grid_w + col).
template <typename Scalar>
struct VitMap {
  int grid_h = 0;
  int grid_w = 0;
  RowMatrix<Scalar> data;  ///< hidden x (grid_h * grid_w)

  int hidden() const { return static_cast<int>(data.rows()); }
  Scalar at(int c, int row, int col) const { return data(c, row * grid_w + col); }
};

/// Drops CLS and lays token k at (k / grid_w, k % grid_w): the inverse of the
/// row-major flatten before patch embedding.
template <typename Scalar>
VitMap<Scalar> retile(const Eigen::Ref<const RowMatrix<Scalar>>& seq, const TokenGrid& grid) {
  grid.validate();
  if (seq.rows() != grid.seq_len || seq.cols() != grid.hidden)
    throw Error(ErrorKind::ShapeMismatch, "sequence is " + std::to_string(seq.rows()) + "x" +
                                              std::to_string(seq.cols()) + ", grid expects " +
                                              std::to_string(grid.seq_len) + "x" + std::to_string(grid.hidden));
  return {grid.grid_h, grid.grid_w, seq.bottomRows(grid.tokens()).transpose()};
}

/// Row-major flatten back to a token sequence, optionally prefixed by a CLS row.
template <typename Scalar>
RowMatrix<Scalar> flatten(const VitMap<Scalar>& map, const std::optional<RowMatrix<Scalar>>& cls = std::nullopt) {
  const Eigen::Index tokens = map.data.cols();
  const Eigen::Index offset = cls ? 1 : 0;
  RowMatrix<Scalar> seq(tokens + offset, map.hidden());
  if (cls) {
    if (cls->rows() != 1 || cls->cols() != map.hidden()) throw Error(ErrorKind::ShapeMismatch, "CLS row shape");
    seq.topRows(1) = *cls;
  }
  seq.bottomRows(tokens) = map.data.transpose();
  return seq;
}

/// Positional-embedding table: optional CLS row followed by grid rows in
/// row-major grid order.
template <typename Scalar>
struct PosEmbed {
  RowMatrix<Scalar> table;
  int grid_h = 0;
  int grid_w = 0;
  bool has_cls = true;

  int hidden() const { return static_cast<int>(table.cols()); }
  int rows() const { return static_cast<int>(table.rows()); }

  void validate() const {
    if (table.rows() != Eigen::Index(grid_h) * grid_w + (has_cls ? 1 : 0))
      throw Error(ErrorKind::ShapeMismatch, "positional table rows do not match grid");
  }
};

/// CLS row passes through; every channel of the grid rows is bicubically
/// resized to the new grid (no clipping).
template <typename Scalar>
PosEmbed<Scalar> resize_pos_embed(const PosEmbed<Scalar>& pe, int new_grid_h, int new_grid_w) {
  pe.validate();
  if (new_grid_h < 1 || new_grid_w < 1) throw Error(ErrorKind::ShapeMismatch, "target grid must be non-empty");
  PosEmbed<Scalar> out;
  out.grid_h = new_grid_h;
  out.grid_w = new_grid_w;
  out.has_cls = pe.has_cls;
  const int offset = pe.has_cls ? 1 : 0;
  out.table.resize(Eigen::Index(new_grid_h) * new_grid_w + offset, pe.hidden());
  if (pe.has_cls) out.table.topRows(1) = pe.table.topRows(1);
  if (new_grid_h == pe.grid_h && new_grid_w == pe.grid_w) {
    out.table = pe.table;
    return out;
  }
  const Taps tx = cubic_taps(pe.grid_w, new_grid_w);
  const Taps ty = cubic_taps(pe.grid_h, new_grid_h);
  PlaneD grid(pe.grid_h, pe.grid_w);
  for (int c = 0; c < pe.hidden(); ++c) {
    for (int r = 0; r < pe.grid_h; ++r)
      for (int col = 0; col < pe.grid_w; ++col) grid(r, col) = static_cast<double>(pe.table(offset + r * pe.grid_w + col, c));
    const PlaneD resized = apply_taps_cols(apply_taps_rows(grid, tx), ty);
    for (int r = 0; r < new_grid_h; ++r)
      for (int col = 0; col < new_grid_w; ++col)
        out.table(offset + r * new_grid_w + col, c) = static_cast<Scalar>(resized(r, col));
  }
  return out;
}

template <typename Scalar>
PosEmbed<Scalar> zero_pos_embed(const PosEmbed<Scalar>& pe) {
  PosEmbed<Scalar> out = pe;
  out.table.setZero();
  return out;
}

/// input_px / patch_px; throws NotDivisible.
int feature_map_size(int input_px, int patch_px);

/// Accepts 1 <= k <= depth; no k selects the last layer. Throws OutOfRange.
int validate_layer_tap(std::optional<int> k, int depth);

/// Linear warmup from 0 to `peak`, then cosine decay to 0 at total_steps.
double cosine_lr(long long step, long long total_steps, long long warmup_steps, double peak);

/// Warmup-cosine schedule whose peak is base_lr * batch_size / 256. Throws
/// InvalidSchedule.
double lr_at(long long step, long long total_steps, long long warmup_steps, double base_lr, double batch_size);

/// Binary exchange format: "PEMB", then little-endian uint32 version, rows,
/// hidden, has_cls, grid_h, grid_w, then rows * hidden float32 values in
/// row-major order.
void write_pos_embed(const std::filesystem::path& path, const PosEmbed<float>& pe);
PosEmbed<float> read_pos_embed(const std::filesystem::path& path);

}  // namespace wsiset
