#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace jenn {

/// Payload kinds stored in a container file.
enum class ContainerKind : std::uint32_t {
    trajectory = 1,
    sensitivity = 2,
    checkpoint = 3,
};

/// Text manifest (ordered key = value lines) plus a flat array of float64.
///
/// On-disk layout, all integers and floats little-endian:
///
///   offset  size  field
///        0     8  magic "JENNBIN\0"
///        8     4  format version (currently 1)
///       12     4  kind (ContainerKind)
///       16     8  manifest offset (always 64)
///       24     8  manifest length in bytes
///       32     8  payload offset (manifest end rounded up to 8)
///       40     8  payload length in float64 values
///       48     4  CRC-32 of the manifest bytes
///       52     4  CRC-32 of the payload bytes
///       56     4  CRC-32 of header bytes 0..55
///       60     4  reserved, zero
///       64     .  manifest (UTF-8), zero padding, payload
///
/// The file ends exactly at payload offset + 8 * payload length.
struct Container {
    ContainerKind kind = ContainerKind::trajectory;
    std::vector<std::pair<std::string, std::string>> manifest;
    std::vector<double> payload;
};

inline constexpr std::uint32_t kContainerFormatVersion = 1;

void write_container(const std::filesystem::path& path, const Container& container);

/// Throws FormatError subclasses on any inconsistency: VersionError,
/// ChecksumError, TruncatedError, ValidationError.
Container read_container(const std::filesystem::path& path);

/// Parses "key = value" lines. Blank lines and '#' comments are skipped.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text);
std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries);

/// Key lookup with typed conversion; missing or malformed keys raise ValidationError.
class ManifestView {
  public:
    explicit ManifestView(const std::vector<std::pair<std::string, std::string>>& entries);

    bool contains(const std::string& key) const { return values_.contains(key); }
    const std::string& text(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::uint64_t unsigned_integer(const std::string& key) const;
    double real(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;

  private:
    std::map<std::string, std::string> values_;
};

/// Shortest text form of a double that parses back to the same bits.
std::string format_real(double value);

} // namespace jenn
