#ifndef LINFA_IO_HPP
#define LINFA_IO_HPP

#include "linfa/core.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace linfa::io {

namespace fs = std::filesystem;

/// 17 significant digits; round-trips every double.
std::string format_double(double v);

/// Parsed CSV with a header row; empty cells and NA are missing.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;
};

CsvTable read_csv_table(const fs::path& path);
void write_csv_table(const fs::path& path, const std::vector<std::string>& header, const Matrix& values);

/// Headerless numeric matrix files (model parameters).
Matrix read_matrix_csv(const fs::path& path);
void write_matrix_csv(const fs::path& path, const Matrix& m);

/// Data plus the bookkeeping needed to map model coordinates back to the
/// input files.
struct Ingested {
  DatasetCollection data;
  std::vector<std::string> names;  ///< one per variable
  Vector means;                    ///< subtracted from every column (zero if not centered)
  bool centered = true;
  Index input_rows = 0;
  Index dropped_rows = 0;
  std::vector<std::string> warnings;
};

/// A path ending in .json is read as a pattern manifest
/// {"d": int, "datasets": [{"path": str, "variables": [1-based ints]}],
///  "centered": bool (optional)}; anything else as a single CSV whose rows
/// are grouped by their observed-column mask.
Ingested ingest(const fs::path& path);
Ingested ingest_manifest(const fs::path& path);
Ingested ingest_csv(const fs::path& path);

/// Writes dataset_<k>.csv files and manifest.json into `dir`. The manifest
/// carries "centered": true so re-ingesting does not shift the data.
fs::path export_manifest(const DatasetCollection& data, const std::vector<std::string>& names,
                         const fs::path& dir);

/// Hex SHA-256 of a file's bytes.
std::string file_digest(const fs::path& path);

std::vector<std::string> default_names(Index d);

}  // namespace linfa::io

#endif  // LINFA_IO_HPP
