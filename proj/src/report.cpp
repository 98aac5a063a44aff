#include <png.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "seqcr/protocol.hpp"

namespace seqcr {

namespace {

const std::array<std::string, 8> kColumns = {"method",   "nrmse_all", "nrmse_cloudy", "nrmse_clear",
                                             "psnr",     "ssim",      "sam",          "samples"};
const std::array<std::string, 8> kHeadings = {"Method", "NRMSE (all)", "NRMSE (cloudy)", "NRMSE (clear)",
                                              "PSNR",   "SSIM",        "SAM",            "N"};

std::vector<std::string> row_cells(const ReportRow& row) {
  std::vector<std::string> cells{row.label};
  if (row.record) {
    const EvalRecord& r = *row.record;
    cells.push_back(format_cell(r.nrmse_all));
    cells.push_back(format_cell(r.nrmse_cloudy));
    cells.push_back(format_cell(r.nrmse_clear));
    cells.push_back(format_cell(r.psnr));
    cells.push_back(format_cell(r.ssim));
    cells.push_back(format_cell(r.sam));
  } else {
    for (int i = 0; i < 6; ++i) cells.push_back(format_cell(std::nullopt));
  }
  cells.push_back(std::to_string(row.samples));
  return cells;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') cur += '"', ++i;
      else if (c == '"') quoted = false;
      else cur += c;
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_cell(const std::string& s) {
  if (s == "---") return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ProtocolError("bad numeric cell '" + s + "'");
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ProtocolError("cannot write " + path.string());
  f << text;
  if (!f) throw ProtocolError("write failed: " + path.string());
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin,count\n";
  for (std::size_t i = 0; i < h.counts.size(); ++i) out += csv_escape(h.bin_labels[i]) + "," + std::to_string(h.counts[i]) + "\n";
  return out;
}

}  // namespace

std::string format_cell(const std::optional<double>& v, int precision) {
  if (!v) return "---";
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << *v;
  return s.str();
}

std::string table_csv(const ReportTable& table) {
  std::string out;
  for (const auto& [k, v] : table.metadata) out += "# " + k + "=" + v + "\n";
  for (std::size_t i = 0; i < kColumns.size(); ++i) out += (i ? "," : "") + kColumns[i];
  out += "\n";
  for (const auto& row : table.rows) {
    const auto cells = row_cells(row);
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_escape(cells[i]);
    out += "\n";
  }
  return out;
}

std::string table_markdown(const ReportTable& table) {
  std::string out = "### " + table.name + "\n\n|";
  for (const auto& h : kHeadings) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < kHeadings.size(); ++i) out += i ? " ---: |" : " :--- |";
  out += "\n";
  for (const auto& row : table.rows) {
    out += "|";
    for (const auto& c : row_cells(row)) out += " " + c + " |";
    out += "\n";
  }
  if (!table.metadata.empty()) {
    out += "\n";
    for (const auto& [k, v] : table.metadata) out += "- " + k + ": " + v + "\n";
  }
  return out;
}

ReportTable parse_table_csv(const std::string& name, const std::string& text) {
  ReportTable table;
  table.name = name;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ProtocolError("bad metadata line: " + line);
      table.metadata[line.substr(2, eq - 2)] = line.substr(eq + 1);
      continue;
    }
    const auto cells = split_csv_line(line);
    if (!header) {
      if (cells.size() != kColumns.size() || cells[0] != kColumns[0]) throw ProtocolError("unexpected table header");
      header = true;
      continue;
    }
    if (cells.size() != kColumns.size()) throw ProtocolError("row has " + std::to_string(cells.size()) + " cells");
    ReportRow row;
    row.label = cells[0];
    row.samples = std::stoul(cells[7]);
    const auto all = parse_cell(cells[1]);
    if (all) {
      EvalRecord r;
      r.nrmse_all = *all;
      r.nrmse_cloudy = parse_cell(cells[2]);
      r.nrmse_clear = parse_cell(cells[3]);
      r.psnr = parse_cell(cells[4]).value_or(0.0);
      r.ssim = parse_cell(cells[5]).value_or(0.0);
      r.sam = parse_cell(cells[6]);
      row.record = r;
    }
    table.add_row(std::move(row));
  }
  if (!header) throw ProtocolError("missing table header");
  return table;
}

Histogram to_histogram(const std::string& name, const CoverageHistogram& h) {
  Histogram out{name, {}, h.counts};
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::ostringstream s;
    s << std::lround(h.edges[i] * 100) << "-" << std::lround(h.edges[i + 1] * 100) << " %";
    out.bin_labels.push_back(s.str());
  }
  return out;
}

Histogram to_histogram(const std::string& name, const PairingStats& s) {
  Histogram out{name, {}, s.histogram};
  for (std::size_t i = 0; i < s.histogram.size(); ++i) out.bin_labels.push_back(std::to_string(i) + " d");
  return out;
}

void write_histogram_png(const std::filesystem::path& path, const Histogram& h, int width, int height) {
  if (width < 8 || height < 8) throw ProtocolError("plot too small");
  const std::size_t bins = std::max<std::size_t>(1, h.counts.size());
  const int peak = h.counts.empty() ? 0 : *std::max_element(h.counts.begin(), h.counts.end());
  const int margin = 4;
  const double bar_w = static_cast<double>(width - 2 * margin) / static_cast<double>(bins);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(width) * height, 255);
  const int base = height - margin;
  for (int x = margin; x < width - margin; ++x) pixels[static_cast<std::size_t>(base) * width + x] = 0;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const int top = peak > 0 ? base - static_cast<int>(std::lround((base - margin) * static_cast<double>(h.counts[b]) / peak)) : base;
    const int x0 = margin + static_cast<int>(b * bar_w) + 1;
    const int x1 = margin + static_cast<int>((b + 1) * bar_w) - 1;
    for (int y = top; y < base; ++y)
      for (int x = x0; x < x1; ++x) pixels[static_cast<std::size_t>(y) * width + x] = 80;
  }

  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), width, nullptr)) {
    throw ProtocolError("cannot write " + path.string() + ": " + image.message);
  }
}

std::vector<std::filesystem::path> report(const std::filesystem::path& out_dir, const std::string& run_id,
                                          std::span<const ReportTable> tables, std::span<const Histogram> histograms) {
  if (run_id.empty() || run_id.find_first_of("/\\") != std::string::npos) throw ProtocolError("bad run id '" + run_id + "'");
  const auto tables_dir = out_dir / "report" / "tables";
  const auto plots_dir = out_dir / "report" / "plots";
  std::error_code ec;
  std::filesystem::create_directories(tables_dir, ec);
  if (ec) throw ProtocolError("cannot create " + tables_dir.string() + ": " + ec.message());
  std::filesystem::create_directories(plots_dir, ec);
  if (ec) throw ProtocolError("cannot create " + plots_dir.string() + ": " + ec.message());

  std::vector<std::filesystem::path> written;
  ReportTable summary;
  summary.name = "summary";
  for (const auto& t : tables) {
    const auto stem = tables_dir / (run_id + "_" + t.name);
    written.push_back(stem.string() + ".csv");
    write_text(written.back(), table_csv(t));
    written.push_back(stem.string() + ".md");
    write_text(written.back(), table_markdown(t));
    for (const auto& row : t.rows) {
      ReportRow r = row;
      r.label = t.name + ": " + row.label;
      summary.add_row(std::move(r));
    }
  }
  const auto sstem = tables_dir / (run_id + "_summary");
  written.push_back(sstem.string() + ".csv");
  write_text(written.back(), table_csv(summary));
  written.push_back(sstem.string() + ".md");
  write_text(written.back(), table_markdown(summary));

  for (const auto& h : histograms) {
    const auto stem = plots_dir / (run_id + "_" + h.name);
    written.push_back(stem.string() + ".png");
    write_histogram_png(written.back(), h);
    written.push_back(stem.string() + ".csv");
    write_text(written.back(), histogram_csv(h));
  }
  return written;
}

}  // namespace seqcr
