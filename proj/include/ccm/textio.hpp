#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace ccm {

// Whole-file text helpers shared by the CLI and the report writers. Both
// throw std::runtime_error naming the path on failure.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);

// FNV-1a over the raw file bytes, used as the dataset digest in manifests.
uint64_t file_checksum(const std::string& path);

// Fixed-precision float formatting shared by every CSV writer, so reruns of
// any command reproduce files byte for byte.
std::string format_csv_number(double v);

}  // namespace ccm
