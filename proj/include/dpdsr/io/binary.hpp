#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dpdsr::io {

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, std::span<const double> values);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::vector<double> read_f64(std::istream& in, std::size_t count);

/// Write to a sibling temporary file and rename it into place, so readers
/// never observe a half-written file.
void atomic_write(const std::filesystem::path& path, const std::string& bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace dpdsr::io
