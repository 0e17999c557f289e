#pragma once

#include "stmtl/dataset.hpp"
#include "stmtl/mtl_net.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace stmtl {

/// A trained model together with what is needed to score raw field data.
///
/// Text layout, one record per line, whitespace-separated tokens, every real
/// number in C99 hexadecimal-float notation so values roundtrip bit-exactly:
///
///   stmtl-checkpoint 1
///   tasks <n> <label>...
///   sources <n> <name>...
///   input_widths <n> <width>...
///   extractor_width <w>
///   shared_width <w>
///   head_widths <n> <width>...
///   dropout <real>
///   hidden_activation sigmoid|linear
///   windows <n>
///   soil_columns <n> <name>...
///   norm <source> <ncols>          followed by ncols lines "<min> <max>"
///   target <min> <max>
///   tensor <name> <rows> <cols>    followed by rows lines of cols values
///   end
///
/// Norm records appear for all four sources in fixed order; tensors follow
/// MtlParameters::tensors() order, weights row-major, biases as a column.
struct Checkpoint {
  MtlModel model;
  NormParams norm;
  std::vector<std::string> soil_columns;
  std::size_t windows = 0;
};

inline constexpr std::string_view kCheckpointMagic = "stmtl-checkpoint";
inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_text(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace stmtl
