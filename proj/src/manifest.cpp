#include <charconv>
#include <fstream>
#include <sstream>

#include "mtqa/datamodel.hpp"

namespace mtqa {
namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string row_error(const std::filesystem::path& path, std::size_t row, const std::string& what) {
  return path.string() + ": row " + std::to_string(row) + ": " + what;
}

}  // namespace

std::vector<ManifestRow> read_manifest_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t row = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++row;
    if (header) {
      header = false;
      continue;
    }
    if (line.empty() || line == "\r") continue;
    const auto cols = split_csv(line);
    if (cols.size() != 4) throw ParseError(row_error(path, row, "expected 4 columns, got " + std::to_string(cols.size())));
    ManifestRow r;
    r.row = row;
    r.relative_path = cols[0];
    r.stack_id = cols[1];
    if (r.relative_path.empty()) throw ParseError(row_error(path, row, "empty image path"));
    if (r.stack_id.empty()) throw ParseError(row_error(path, row, "empty stack_id"));
    const auto& idx = cols[2];
    auto [p, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), r.slice_index);
    if (ec != std::errc{} || p != idx.data() + idx.size() || r.slice_index < 0) {
      throw ParseError(row_error(path, row, "bad slice_index '" + idx + "'"));
    }
    if (cols[3] != "UNLABELED") {
      r.label = parse_label(cols[3]);
      if (!r.label) throw ParseError(row_error(path, row, "unknown label '" + cols[3] + "'"));
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

Dataset load_manifest(const std::filesystem::path& path, Split split) {
  const auto rows = read_manifest_rows(path);
  const auto base = path.parent_path();
  Dataset ds;
  ds.split = split;
  int size = -1;
  for (const auto& r : rows) {
    const std::size_t row = r.row;
    Image img;
    try {
      img = read_pgm(base / r.relative_path);
    } catch (const Error& e) {
      throw IoError(row_error(path, row, e.what()));
    }
    if (img.rows() != img.cols()) throw DataError(row_error(path, row, "image is not square"));
    if (size < 0) size = img.rows();
    if (img.rows() != size) throw DataError(row_error(path, row, "image size differs from earlier rows"));
    Slice s{std::move(img), r.stack_id, r.slice_index};
    if (r.label) ds.labeled.push_back({std::move(s), *r.label});
    else ds.unlabeled.push_back(std::move(s));
  }
  return ds;
}

void save_manifest(const Dataset& dataset, const std::filesystem::path& path, const std::string& image_subdir) {
  const auto base = path.parent_path();
  std::filesystem::create_directories(base / image_subdir);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << "relative_image_path,stack_id,slice_index,label\n";
  const std::string split(to_string(dataset.split));
  auto emit = [&](const Slice& s, std::string_view label) {
    if (s.stack_id.find(',') != std::string::npos) throw DataError("stack_id contains a comma: " + s.stack_id);
    const std::string rel = image_subdir + "/" + split + "_" + s.stack_id + "_" + std::to_string(s.slice_index) + ".pgm";
    write_pgm16(base / rel, s.pixels);
    out << rel << ',' << s.stack_id << ',' << s.slice_index << ',' << label << '\n';
  };
  for (const auto& l : dataset.labeled) emit(l.slice, to_string(l.label));
  for (const auto& u : dataset.unlabeled) emit(u, "UNLABELED");
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace mtqa
