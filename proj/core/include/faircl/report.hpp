#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "faircl/experiment.hpp"

namespace faircl {

enum class TableFormat { kCsv, kMarkdown, kJson };

// "csv", "md" / "markdown", "json".
TableFormat parse_table_format(std::string_view text);
std::string file_extension(TableFormat format);

// Accuracy-per-domain (mean and sample std) with fairness, plus CF and
// overall accuracy after each task for sequential methods, one row per
// bundle and one table group per attribute. Values rounded to 3 decimals;
// markdown bolds the best value of every column. Every row carries its
// config hash. Throws InputError listing the missing cells of any partial
// bundle.
std::string emit_tables(std::span<const ResultBundle> bundles, TableFormat format);

// Every result.json below `dir`, sorted by path.
std::vector<ResultBundle> collect_bundles(const std::filesystem::path& dir);

// Parses the output of emit_tables(..., kJson).
std::vector<ResultBundle> parse_json_tables(const std::string& text);

}  // namespace faircl
