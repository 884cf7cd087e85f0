#include "jenn/container.hpp"

#include "jenn/error.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace jenn {

namespace {

constexpr std::array<char, 8> kMagic{'J', 'E', 'N', 'N', 'B', 'I', 'N', '\0'};
constexpr std::size_t kHeaderSize = 64;

std::uint32_t crc32_of(const unsigned char* data, std::size_t size) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in slices.
    while (size > 0) {
        const auto slice = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
        crc = crc32(crc, data, slice);
        data += slice;
        size -= slice;
    }
    return static_cast<std::uint32_t>(crc);
}

template <class T>
void put_le(std::vector<unsigned char>& out, std::size_t offset, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out[offset + i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFFu);
    }
}

template <class T>
T get_le(const unsigned char* in) {
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        value |= static_cast<T>(in[i]) << (8 * i);
    }
    return value;
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

} // namespace

std::string format_real(double value) { return fmt::format("{}", value); }

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') {
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(fmt::format("line {}: expected 'key = value', got '{}'", line_no, stripped));
        }
        std::string key = trim(std::string_view(stripped).substr(0, eq));
        if (key.empty()) {
            throw ValidationError(fmt::format("line {}: empty key", line_no));
        }
        entries.emplace_back(std::move(key), trim(std::string_view(stripped).substr(eq + 1)));
    }
    return entries;
}

std::string format_key_values(const std::vector<std::pair<std::string, std::string>>& entries) {
    std::string out;
    for (const auto& [key, value] : entries) {
        out += fmt::format("{} = {}\n", key, value);
    }
    return out;
}

ManifestView::ManifestView(const std::vector<std::pair<std::string, std::string>>& entries) {
    for (const auto& [key, value] : entries) {
        if (!values_.emplace(key, value).second) {
            throw ValidationError(fmt::format("manifest: duplicate key '{}'", key));
        }
    }
}

const std::string& ManifestView::text(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        throw ValidationError(fmt::format("manifest: missing key '{}'", key));
    }
    return it->second;
}

namespace {
template <class T>
T parse_number(const std::string& key, const std::string& raw) {
    T value{};
    const auto* end = raw.data() + raw.size();
    const auto [ptr, ec] = std::from_chars(raw.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ValidationError(fmt::format("manifest: key '{}' has malformed value '{}'", key, raw));
    }
    return value;
}
} // namespace

std::int64_t ManifestView::integer(const std::string& key) const {
    return parse_number<std::int64_t>(key, text(key));
}

std::uint64_t ManifestView::unsigned_integer(const std::string& key) const {
    return parse_number<std::uint64_t>(key, text(key));
}

double ManifestView::real(const std::string& key) const {
    return parse_number<double>(key, text(key));
}

std::vector<int> ManifestView::int_list(const std::string& key) const {
    std::vector<int> out;
    const std::string& raw = text(key);
    std::size_t start = 0;
    while (start <= raw.size()) {
        const auto comma = raw.find(',', start);
        const std::string item = trim(std::string_view(raw).substr(start, comma - start));
        out.push_back(parse_number<int>(key, item));
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

void write_container(const std::filesystem::path& path, const Container& container) {
    const std::string manifest = format_key_values(container.manifest);
    const std::size_t manifest_offset = kHeaderSize;
    const std::size_t payload_offset = (manifest_offset + manifest.size() + 7) / 8 * 8;
    const std::size_t total = payload_offset + 8 * container.payload.size();

    std::vector<unsigned char> bytes(total, 0);
    std::memcpy(bytes.data(), kMagic.data(), kMagic.size());
    std::memcpy(bytes.data() + manifest_offset, manifest.data(), manifest.size());
    for (std::size_t i = 0; i < container.payload.size(); ++i) {
        put_le(bytes, payload_offset + 8 * i, std::bit_cast<std::uint64_t>(container.payload[i]));
    }

    put_le(bytes, 8, kContainerFormatVersion);
    put_le(bytes, 12, static_cast<std::uint32_t>(container.kind));
    put_le(bytes, 16, static_cast<std::uint64_t>(manifest_offset));
    put_le(bytes, 24, static_cast<std::uint64_t>(manifest.size()));
    put_le(bytes, 32, static_cast<std::uint64_t>(payload_offset));
    put_le(bytes, 40, static_cast<std::uint64_t>(container.payload.size()));
    put_le(bytes, 48, crc32_of(bytes.data() + manifest_offset, manifest.size()));
    put_le(bytes, 52, crc32_of(bytes.data() + payload_offset, 8 * container.payload.size()));
    put_le(bytes, 56, crc32_of(bytes.data(), 56));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot open '{}' for writing", path.string()));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(fmt::format("write to '{}' failed", path.string()));
    }
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(fmt::format("cannot open '{}' for reading", path.string()));
    }
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::string name = path.string();

    if (bytes.size() < kHeaderSize) {
        throw TruncatedError(fmt::format("'{}': file shorter than the {}-byte header", name, kHeaderSize));
    }
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw FormatError(fmt::format("'{}': not a jenn container (bad magic)", name));
    }
    const auto version = get_le<std::uint32_t>(bytes.data() + 8);
    if (version != kContainerFormatVersion) {
        throw VersionError(fmt::format("'{}': format version {} is not supported (expected {})", name,
                                       version, kContainerFormatVersion));
    }
    if (get_le<std::uint32_t>(bytes.data() + 56) != crc32_of(bytes.data(), 56)) {
        throw ChecksumError(fmt::format("'{}': header checksum mismatch", name));
    }
    const auto kind = get_le<std::uint32_t>(bytes.data() + 12);
    const auto manifest_offset = get_le<std::uint64_t>(bytes.data() + 16);
    const auto manifest_size = get_le<std::uint64_t>(bytes.data() + 24);
    const auto payload_offset = get_le<std::uint64_t>(bytes.data() + 32);
    const auto payload_count = get_le<std::uint64_t>(bytes.data() + 40);

    if (kind < 1 || kind > 3) {
        throw ValidationError(fmt::format("'{}': unknown container kind {}", name, kind));
    }
    if (manifest_offset != kHeaderSize || payload_offset < manifest_offset + manifest_size
        || payload_offset % 8 != 0) {
        throw ValidationError(fmt::format("'{}': inconsistent section offsets", name));
    }
    if (payload_count > (UINT64_MAX - payload_offset) / 8) {
        throw ValidationError(fmt::format("'{}': payload length overflows", name));
    }
    const std::uint64_t expected_size = payload_offset + 8 * payload_count;
    if (bytes.size() < expected_size) {
        throw TruncatedError(fmt::format("'{}': file has {} bytes, header promises {}", name, bytes.size(),
                                         expected_size));
    }
    if (bytes.size() > expected_size) {
        throw ValidationError(fmt::format("'{}': {} trailing bytes after payload", name,
                                          bytes.size() - expected_size));
    }
    if (get_le<std::uint32_t>(bytes.data() + 48) != crc32_of(bytes.data() + manifest_offset, manifest_size)) {
        throw ChecksumError(fmt::format("'{}': manifest checksum mismatch", name));
    }
    if (get_le<std::uint32_t>(bytes.data() + 52) != crc32_of(bytes.data() + payload_offset, 8 * payload_count)) {
        throw ChecksumError(fmt::format("'{}': payload checksum mismatch", name));
    }

    Container c;
    c.kind = static_cast<ContainerKind>(kind);
    c.manifest = parse_key_values(
        std::string(reinterpret_cast<const char*>(bytes.data() + manifest_offset), manifest_size));
    c.payload.resize(payload_count);
    for (std::size_t i = 0; i < payload_count; ++i) {
        c.payload[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes.data() + payload_offset + 8 * i));
    }
    return c;
}

} // namespace jenn
