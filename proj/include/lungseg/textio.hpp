#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the CSV / JSONL readers and writers.
namespace lungseg {

[[nodiscard]] std::string_view trim(std::string_view s);

/// Splits a plain comma-separated line (no quoting support) and trims each field.
[[nodiscard]] std::vector<std::string> split_csv_line(std::string_view line);

/// Shortest round-trip decimal representation; byte-stable across runs.
[[nodiscard]] std::string format_real(double v);

/// Fixed-point formatting with `digits` decimals.
[[nodiscard]] std::string format_fixed(double v, int digits);

// `what` names the field in the error message.
[[nodiscard]] double parse_real(std::string_view s, const std::string& what);
[[nodiscard]] long long parse_int(std::string_view s, const std::string& what);

}  // namespace lungseg
