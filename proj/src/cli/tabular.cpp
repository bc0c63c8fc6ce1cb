#include "flowbind/cli/tabular.hpp"

#include <charconv>
#include <sstream>

#include <json.hpp>

#include "flowbind/cli/config.hpp"

namespace flowbind {

TableFormat parse_table_format(const std::string& text) {
  if (text == "csv") return TableFormat::csv;
  if (text == "json") return TableFormat::json;
  throw ArgumentError("unknown format '" + text + "' (expected csv or json)");
}

TableFormat table_format_for(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "json") return TableFormat::json;
  if (ext == "csv") return TableFormat::csv;
  throw ArgumentError("cannot infer table format of '" + path + "'; pass --format");
}

const Matrix* LatentTable::find(const std::string& name) const {
  for (const auto& [n, m] : blocks) {
    if (n == name) return &m;
  }
  return nullptr;
}

namespace {

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
  throw Error("input line " + std::to_string(line) + ": " + msg);
}

bool blank(const std::string& text) {
  return text.find_first_not_of(" \t\r\n") == std::string::npos;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, v);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    fail(line, "'" + cell + "' is not a finite number");
  }
  return v;
}

LatentTable read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  LatentTable table;
  std::vector<std::size_t> block_of;  // column -> block
  bool header = false;
  std::vector<std::vector<double>> cells;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (!header) {
      header = true;
      for (const auto& f : fields) {
        const auto dot = f.rfind('.');
        if (dot == std::string::npos || dot == 0) {
          fail(line_no, "header column '" + f + "' is not <modality>.<index>");
        }
        const std::string name = f.substr(0, dot);
        std::size_t b = table.blocks.size();
        for (std::size_t k = 0; k < table.blocks.size(); ++k) {
          if (table.blocks[k].first == name) b = k;
        }
        if (b == table.blocks.size()) {
          table.blocks.push_back({name, Matrix()});
        } else if (b + 1 != table.blocks.size()) {
          fail(line_no, "columns of modality '" + name + "' are not contiguous");
        }
        if (f.substr(dot + 1) != std::to_string(table.blocks[b].second.cols)) {
          fail(line_no, "expected column '" + name + "." +
                            std::to_string(table.blocks[b].second.cols) + "', got '" + f + "'");
        }
        ++table.blocks[b].second.cols;
        block_of.push_back(b);
      }
      continue;
    }
    if (fields.size() != block_of.size()) {
      fail(line_no, "expected " + std::to_string(block_of.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(parse_cell(f, line_no));
    cells.push_back(std::move(row));
  }
  table.rows = cells.size();
  std::size_t first = 0;
  for (auto& [name, m] : table.blocks) {
    m.rows = table.rows;
    m.values.reserve(m.rows * m.cols);
    for (const auto& row : cells) {
      m.values.insert(m.values.end(), row.begin() + static_cast<std::ptrdiff_t>(first),
                      row.begin() + static_cast<std::ptrdiff_t>(first + m.cols));
    }
    first += m.cols;
  }
  return table;
}

/// Line numbers of each top-level array element's opening brace.
std::vector<std::size_t> element_lines(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t line = 1;
  int depth = 0;
  bool in_string = false, escaped = false;
  for (char c : text) {
    if (c == '\n') ++line;
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      if (depth == 1) out.push_back(line);
      ++depth;
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return out;
}

LatentTable read_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("malformed JSON input: ") + e.what());
  }
  if (!doc.is_array()) fail(1, "JSON input must be an array of objects");
  const auto lines = element_lines(text);
  LatentTable table;
  table.rows = doc.size();
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const std::size_t line = r < lines.size() ? lines[r] : 1;
    const auto& obj = doc[r];
    if (!obj.is_object()) fail(line, "row " + std::to_string(r) + " is not an object");
    if (r == 0) {
      for (const auto& [name, value] : obj.items()) {
        if (!value.is_array() || value.empty()) {
          fail(line, "'" + name + "' must be a non-empty number array");
        }
        table.blocks.push_back({name, Matrix(0, value.size())});
      }
    }
    if (obj.size() != table.blocks.size()) {
      fail(line, "row " + std::to_string(r) + " has a different set of modalities");
    }
    for (auto& [name, m] : table.blocks) {
      const auto it = obj.find(name);
      if (it == obj.end()) fail(line, "row " + std::to_string(r) + " lacks '" + name + "'");
      if (!it->is_array() || it->size() != m.cols) {
        fail(line, "'" + name + "' must hold " + std::to_string(m.cols) + " numbers");
      }
      for (const auto& v : *it) {
        if (!v.is_number()) fail(line, "'" + name + "' holds a non-number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) fail(line, "'" + name + "' holds a non-finite number");
        m.values.push_back(x);
      }
      ++m.rows;
    }
  }
  return table;
}

}  // namespace

LatentTable read_latents(const std::string& text, TableFormat format) {
  if (blank(text)) {
    LatentTable empty;
    empty.empty_input = true;
    return empty;
  }
  return format == TableFormat::csv ? read_csv(text) : read_json(text);
}

std::string write_latents(const LatentTable& table, TableFormat format) {
  if (table.empty_input) return "";
  std::string out;
  if (format == TableFormat::csv) {
    bool first = true;
    for (const auto& [name, m] : table.blocks) {
      for (std::size_t c = 0; c < m.cols; ++c) {
        out += (first ? "" : ",") + name + "." + std::to_string(c);
        first = false;
      }
    }
    out += '\n';
    for (std::size_t r = 0; r < table.rows; ++r) {
      first = true;
      for (const auto& [name, m] : table.blocks) {
        for (double v : m.row(r)) {
          out += (first ? "" : ",") + format_double(v);
          first = false;
        }
      }
      out += '\n';
    }
    return out;
  }
  out += "[";
  for (std::size_t r = 0; r < table.rows; ++r) {
    out += r ? ",\n  {" : "\n  {";
    bool first = true;
    for (const auto& [name, m] : table.blocks) {
      out += (first ? "\"" : ", \"") + name + "\": [";
      first = false;
      const auto row = m.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) {
        out += (c ? ", " : "") + format_double(row[c]);
      }
      out += "]";
    }
    out += "}";
  }
  out += table.rows ? "\n]\n" : "]\n";
  return out;
}

std::string format_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

std::string write_csv(const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t c = 0; c < header.size(); ++c) out += (c ? "," : "") + header[c];
  out += '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + row[c];
    out += '\n';
  }
  return out;
}

}  // namespace flowbind
