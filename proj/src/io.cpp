#include "semxc/io.hpp"

#include <array>
#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "semxc/error.hpp"
#include "semxc/rng.hpp"

static_assert(std::endian::native == std::endian::little,
              "binary artifacts assume a little-endian host");

namespace semxc::io {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("short write to " + path.string());
}

std::uint64_t file_hash(const std::filesystem::path& path) {
    const std::string data = read_file(path);
    return Fnv1a{}.bytes(data.data(), data.size()).digest();
}

std::string hex64(std::uint64_t v) {
    std::array<char, 17> buf{};
    std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf.data(), 16);
}

void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
        ++line_no;
        std::string_view line = text.substr(pos, end - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") != std::string_view::npos) fn(line_no, line);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
}

std::string dump_json(const nlohmann::json& j, int indent) {
    // nlohmann::json (std::map backed) already sorts keys and prints
    // doubles with round-trip precision.
    return j.dump(indent) + "\n";
}

void write_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }
void write_i32(std::ostream& out, std::int32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
void write_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }

void write_str(std::ostream& out, std::string_view s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_f64s(std::ostream& out, const double* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

namespace {
void read_exact(std::istream& in, void* dst, std::size_t n) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw InputError("truncated binary artifact");
}
}  // namespace

std::uint32_t read_u32(std::istream& in) { std::uint32_t v; read_exact(in, &v, 4); return v; }
std::uint64_t read_u64(std::istream& in) { std::uint64_t v; read_exact(in, &v, 8); return v; }
std::int32_t read_i32(std::istream& in) { std::int32_t v; read_exact(in, &v, 4); return v; }
double read_f64(std::istream& in) { double v; read_exact(in, &v, 8); return v; }

std::string read_str(std::istream& in) {
    const std::uint32_t n = read_u32(in);
    std::string s(n, '\0');
    read_exact(in, s.data(), n);
    return s;
}

void read_f64s(std::istream& in, double* data, std::size_t n) { read_exact(in, data, n * sizeof(double)); }

void write_header(std::ostream& out, const ArtifactHeader& header) {
    if (header.magic.size() != 8) throw std::logic_error("artifact magic must be 8 bytes");
    out.write(header.magic.data(), 8);
    write_u32(out, header.version);
    const std::string meta = header.meta.dump();
    write_u64(out, meta.size());
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
}

ArtifactHeader read_header(std::istream& in, std::string_view expected_magic,
                           std::uint32_t expected_version) {
    ArtifactHeader h;
    h.magic.resize(8);
    read_exact(in, h.magic.data(), 8);
    if (h.magic != expected_magic)
        throw ConsistencyError("artifact magic mismatch: expected " + std::string(expected_magic) +
                               ", found " + h.magic);
    h.version = read_u32(in);
    if (h.version != expected_version)
        throw ConsistencyError("unsupported " + std::string(expected_magic) + " version " +
                               std::to_string(h.version));
    const std::uint64_t len = read_u64(in);
    if (len > (1ULL << 30)) throw InputError("artifact header too large");
    std::string meta(len, '\0');
    read_exact(in, meta.data(), len);
    try {
        h.meta = nlohmann::json::parse(meta);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("corrupt artifact header: ") + e.what());
    }
    return h;
}

}  // namespace semxc::io
