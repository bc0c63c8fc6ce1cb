#pragma once

#include <string>
#include <utility>
#include <vector>

#include "flowbind/numcore/matrix.hpp"

namespace flowbind {

enum class TableFormat { csv, json };

TableFormat parse_table_format(const std::string& text);
/// From the file extension (.csv / .json).
TableFormat table_format_for(const std::string& path);

/// Per-modality latent blocks sharing a row count, in column order.
/// CSV files carry a header of `<modality>.<k>` columns; JSON files hold an
/// array of objects mapping modality names to number arrays.
struct LatentTable {
  std::size_t rows = 0;
  std::vector<std::pair<std::string, Matrix>> blocks;

  bool empty_input = false;  // the source text had no content at all
  const Matrix* find(const std::string& name) const;
};

/// Malformed input raises an Error naming the offending line.
LatentTable read_latents(const std::string& text, TableFormat format);
std::string write_latents(const LatentTable& table, TableFormat format);

/// Shortest round-trip decimal; NaN becomes an empty cell.
std::string format_cell(double v);

/// Plain CSV with LF line endings.
std::string write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

}  // namespace flowbind
