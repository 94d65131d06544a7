#pragma once
// Rendering of result files: CSV tables and SVG survival/trajectory plots.
// Output is deterministic (shortest round-trip number formatting, fixed
// element order).

#include <string>

namespace perpetua::cli {

// Reads JSONL results and writes summary.csv plus one CSV/SVG pair per
// embedded curve into out_dir. format is "csv", "svg", or "both".
// Returns 0 on success, 2 on malformed input.
int report_results(const std::string& results_path, const std::string& out_dir,
                   const std::string& format = "both");

}  // namespace perpetua::cli
