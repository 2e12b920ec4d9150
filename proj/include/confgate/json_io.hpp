#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace confgate {

// On-disk documents: insertion-ordered keys, 32-bit floats. nlohmann parses
// floats with strtof and prints the shortest round-tripping decimal, so a
// value written and re-read is bit-identical.
using FloatJson = nlohmann::basic_json<nlohmann::ordered_map, std::vector, std::string, bool,
                                       std::int64_t, std::uint64_t, float>;

// Report documents (metrics, pipeline results) keep full double precision.
using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

FloatJson float_array(std::span<const double> values);
std::vector<double> read_float_array(const FloatJson& array, std::string_view field);

// Rounds each value through float32, the on-disk precision.
std::vector<double> quantize_f32(std::span<const double> values);

// Writes to "<path>.tmp.<pid>" and renames over path on commit(). An
// uncommitted writer removes its temp file.
class AtomicFileWriter {
public:
    explicit AtomicFileWriter(std::filesystem::path path);
    ~AtomicFileWriter();

    AtomicFileWriter(const AtomicFileWriter&) = delete;
    AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

    void write_line(std::string_view line);
    void write(std::string_view text);
    void commit();

private:
    std::filesystem::path path_;
    std::filesystem::path temp_path_;
    std::ofstream out_;
    bool committed_ = false;
};

void write_text_atomic(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// Streams a JSON Lines file one parsed line at a time. Blank lines are
// skipped; a parse failure throws DataError naming path and line number.
class JsonlReader {
public:
    explicit JsonlReader(std::filesystem::path path);

    bool next(FloatJson& value);
    std::size_t line_number() const noexcept { return line_number_; }
    std::string where() const;

private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::string buffer_;
    std::size_t line_number_ = 0;
};

// Field accessors that throw DataError with a readable message.
const FloatJson& require_field(const FloatJson& object, std::string_view key);
std::string require_string(const FloatJson& object, std::string_view key);
std::int64_t require_int(const FloatJson& object, std::string_view key);

} // namespace confgate
