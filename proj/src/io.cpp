#include "linfa/io.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace linfa::io {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out = s.substr(b, e - b + 1);
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::optional<double> parse_cell(const std::string& cell, const fs::path& path, std::size_t line) {
  if (cell.empty() || cell == "NA") return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size()) {
    throw InputError(path.string() + ":" + std::to_string(line) + ": cannot parse '" + cell + "' as a number");
  }
  return v;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

// Subtracts pooled observed means in place; returns the means.
Vector center(std::vector<Matrix>& matrices, const ObservationPattern& pattern) {
  const Index d = pattern.dim();
  Vector sums = Vector::Zero(d);
  Vector counts = Vector::Zero(d);
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const auto& s = pattern.subset(k);
    for (std::size_t c = 0; c < s.size(); ++c) {
      sums(s[c]) += matrices[k].col(static_cast<Index>(c)).sum();
      counts(s[c]) += static_cast<double>(matrices[k].rows());
    }
  }
  const Vector means = sums.cwiseQuotient(counts);
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const auto& s = pattern.subset(k);
    for (std::size_t c = 0; c < s.size(); ++c) {
      matrices[k].col(static_cast<Index>(c)).array() -= means(s[c]);
    }
  }
  return means;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> default_names(Index d) {
  std::vector<std::string> names;
  for (Index i = 0; i < d; ++i) names.push_back("X" + std::to_string(i + 1));
  return names;
}

CsvTable read_csv_table(const fs::path& path) {
  auto in = open_in(path);
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    std::vector<std::optional<double>> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_cell(c, path, lineno));
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw InputError(path.string() + ": missing header row");
  return table;
}

void write_csv_table(const fs::path& path, const std::vector<std::string>& header, const Matrix& values) {
  auto out = open_out(path);
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) out << (j ? "," : "") << format_double(values(i, j));
    out << '\n';
  }
}

Matrix read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    for (const auto& c : split_line(line)) {
      auto v = parse_cell(c, path, lineno);
      if (!v) throw InputError(path.string() + ":" + std::to_string(lineno) + ": missing value in parameter file");
      row.push_back(*v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw InputError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path.string() + ": empty matrix file");
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  auto out = open_out(path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

Ingested ingest(const fs::path& path) {
  return path.extension() == ".json" ? ingest_manifest(path) : ingest_csv(path);
}

Ingested ingest_manifest(const fs::path& path) {
  auto in = open_in(path);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!manifest.contains("d") || !manifest.contains("datasets") || !manifest["datasets"].is_array()) {
    throw InputError(path.string() + ": manifest needs \"d\" and a \"datasets\" array");
  }
  const Index d = manifest["d"].get<Index>();
  if (d < 2) throw InputError(path.string() + ": d must be at least 2");
  const bool already_centered = manifest.value("centered", false);
  const fs::path base = path.parent_path();

  std::vector<std::string> names(static_cast<std::size_t>(d));
  std::vector<IndexSet> subsets;
  std::vector<Matrix> matrices;
  Index rows_total = 0;
  for (const auto& entry : manifest["datasets"]) {
    const fs::path file = base / entry.at("path").get<std::string>();
    const auto vars = entry.at("variables").get<std::vector<Index>>();
    const CsvTable table = read_csv_table(file);
    if (table.header.size() != vars.size()) {
      throw InputError(file.string() + ": header has " + std::to_string(table.header.size()) +
                       " columns but the manifest lists " + std::to_string(vars.size()) + " variables");
    }
    // Sort columns by variable index.
    std::vector<std::size_t> order(vars.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vars[a] < vars[b]; });
    IndexSet subset;
    for (std::size_t c : order) {
      const Index v = vars[c];
      if (v < 1 || v > d) throw InputError(file.string() + ": variable index " + std::to_string(v) + " out of range");
      auto& name = names[static_cast<std::size_t>(v - 1)];
      if (name.empty()) {
        name = table.header[c];
      } else if (name != table.header[c]) {
        throw InputError(file.string() + ": column '" + table.header[c] + "' conflicts with earlier name '" + name +
                         "' for variable " + std::to_string(v));
      }
      subset.push_back(v - 1);
    }
    Matrix x(static_cast<Index>(table.rows.size()), static_cast<Index>(vars.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      for (std::size_t c = 0; c < order.size(); ++c) {
        const auto& cell = table.rows[r][order[c]];
        if (!cell) throw InputError(file.string() + ": missing cell in a manifest dataset (row " + std::to_string(r + 1) + ")");
        x(static_cast<Index>(r), static_cast<Index>(c)) = *cell;
      }
    }
    rows_total += x.rows();
    subsets.push_back(std::move(subset));
    matrices.push_back(std::move(x));
  }
  ObservationPattern pattern(d, std::move(subsets));
  Vector means = Vector::Zero(d);
  if (!already_centered) means = center(matrices, pattern);
  return Ingested{DatasetCollection(std::move(pattern), std::move(matrices)), std::move(names), std::move(means),
                  !already_centered, rows_total, 0, {}};
}

Ingested ingest_csv(const fs::path& path) {
  const CsvTable table = read_csv_table(path);
  const Index d = static_cast<Index>(table.header.size());
  if (d < 2) throw InputError(path.string() + ": need at least two columns");

  std::map<std::vector<bool>, std::size_t> group_of;
  std::vector<IndexSet> subsets;
  std::vector<std::vector<std::size_t>> members;
  Index dropped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<bool> mask(static_cast<std::size_t>(d));
    Index observed = 0;
    for (Index j = 0; j < d; ++j) {
      mask[static_cast<std::size_t>(j)] = table.rows[r][static_cast<std::size_t>(j)].has_value();
      observed += mask[static_cast<std::size_t>(j)] ? 1 : 0;
    }
    if (observed < 2) {
      ++dropped;
      continue;
    }
    auto [it, inserted] = group_of.try_emplace(mask, subsets.size());
    if (inserted) {
      IndexSet s;
      for (Index j = 0; j < d; ++j) {
        if (mask[static_cast<std::size_t>(j)]) s.push_back(j);
      }
      subsets.push_back(std::move(s));
      members.emplace_back();
    }
    members[it->second].push_back(r);
  }
  if (subsets.empty()) throw InputError(path.string() + ": no row has at least two observed values");

  std::vector<char> seen(static_cast<std::size_t>(d), 0);
  for (const auto& s : subsets) {
    for (Index j : s) seen[static_cast<std::size_t>(j)] = 1;
  }
  for (Index j = 0; j < d; ++j) {
    if (!seen[static_cast<std::size_t>(j)]) {
      throw InputError(path.string() + ": variable '" + table.header[static_cast<std::size_t>(j)] +
                       "' is never observed");
    }
  }

  std::vector<Matrix> matrices;
  std::size_t singletons = 0;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    Matrix x(static_cast<Index>(members[k].size()), static_cast<Index>(subsets[k].size()));
    for (std::size_t r = 0; r < members[k].size(); ++r) {
      for (std::size_t c = 0; c < subsets[k].size(); ++c) {
        x(static_cast<Index>(r), static_cast<Index>(c)) =
            *table.rows[members[k][r]][static_cast<std::size_t>(subsets[k][c])];
      }
    }
    singletons += x.rows() == 1 ? 1 : 0;
    matrices.push_back(std::move(x));
  }

  ObservationPattern pattern(d, std::move(subsets));
  Vector means = center(matrices, pattern);
  Ingested out{DatasetCollection(std::move(pattern), std::move(matrices)), table.header, std::move(means), true,
               static_cast<Index>(table.rows.size()), dropped, {}};
  if (dropped > 0) {
    out.warnings.push_back("dropped " + std::to_string(dropped) + " row(s) with fewer than two observed values");
  }
  if (singletons >= 10) {
    out.warnings.push_back(std::to_string(singletons) + " missingness masks occur in a single row each");
  }
  return out;
}

fs::path export_manifest(const DatasetCollection& data, const std::vector<std::string>& names, const fs::path& dir) {
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["d"] = data.dim();
  manifest["centered"] = true;
  manifest["datasets"] = nlohmann::json::array();
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& subset = data.pattern().subset(k);
    const std::string file = "dataset_" + std::to_string(k + 1) + ".csv";
    std::vector<std::string> header;
    std::vector<Index> vars;
    for (Index i : subset) {
      header.push_back(names[static_cast<std::size_t>(i)]);
      vars.push_back(i + 1);
    }
    write_csv_table(dir / file, header, data.matrix(k));
    manifest["datasets"].push_back({{"path", file}, {"variables", vars}});
  }
  const fs::path path = dir / "manifest.json";
  auto out = open_out(path);
  out << manifest.dump(2) << '\n';
  return path;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

}  // namespace linfa::io
