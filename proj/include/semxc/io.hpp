#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include <json.hpp>

namespace semxc::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

/// Calls `fn(line_number, line)` for each non-blank line (1-based numbering).
void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn);

/// JSON values written by the pipeline use this form so reruns are
/// byte-identical: keys sorted, 17 significant digits for doubles.
std::string dump_json(const nlohmann::json& j, int indent = 2);

// Binary artifact container shared by params.bin, clusters.bin, store.bin
// and the shortlist index:
//   magic (8 bytes) | u32 format version | u64 header length | header JSON
//   | payload
// Numbers in the payload are little-endian, doubles IEEE-754.
struct ArtifactHeader {
    std::string magic;  // exactly 8 characters
    std::uint32_t version = 1;
    nlohmann::json meta;
};

void write_header(std::ostream& out, const ArtifactHeader& header);
/// Throws ConsistencyError when the magic or version does not match.
ArtifactHeader read_header(std::istream& in, std::string_view expected_magic,
                           std::uint32_t expected_version);

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_i32(std::ostream& out, std::int32_t v);
void write_f64(std::ostream& out, double v);
void write_str(std::ostream& out, std::string_view s);
void write_f64s(std::ostream& out, const double* data, std::size_t n);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
std::int32_t read_i32(std::istream& in);
double read_f64(std::istream& in);
std::string read_str(std::istream& in);
void read_f64s(std::istream& in, double* data, std::size_t n);

}  // namespace semxc::io
