#include "geofusion/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace geofusion {

uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t seed) {
    uint64_t h = seed;
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

BinWriter::BinWriter(const std::string& magic, uint32_t version) {
    if (magic.size() != 4) throw std::invalid_argument("BinWriter: magic must be 4 bytes");
    raw(magic.data(), 4);
    u32(version);
}

void BinWriter::raw(const void* p, size_t n) {
    const uint8_t* b = static_cast<const uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
}

void BinWriter::u32(uint32_t v) { raw(&v, sizeof v); }
void BinWriter::u64(uint64_t v) { raw(&v, sizeof v); }
void BinWriter::i64(int64_t v) { raw(&v, sizeof v); }
void BinWriter::f64(double v) { raw(&v, sizeof v); }

void BinWriter::str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
}

void BinWriter::tensor(const Tensor& t) {
    u32(static_cast<uint32_t>(t.shape.size()));
    for (int e : t.shape) u32(static_cast<uint32_t>(e));
    raw(t.data.data(), t.data.size() * sizeof(double));
}

void BinWriter::f64_vec(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
}

void BinWriter::int_vec(const std::vector<int>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(int));
}

void BinWriter::save(const std::string& path) {
    uint64_t sum = fnv1a64(buf_.data(), buf_.size());
    u64(sum);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw IoError("write failed: " + path);
    buf_.resize(buf_.size() - sizeof(uint64_t));  // keep reusable for hashing
}

BinReader::BinReader(const std::string& path, const std::string& magic, uint32_t expect_version) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open: " + path);
    const auto size = static_cast<size_t>(in.tellg());
    in.seekg(0);
    buf_.resize(size);
    in.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError("read failed: " + path);

    if (size < 4 + sizeof(uint32_t) + sizeof(uint64_t))
        throw TruncationError("file too short: " + path);
    payload_end_ = size - sizeof(uint64_t);

    uint64_t stored;
    std::memcpy(&stored, buf_.data() + payload_end_, sizeof stored);
    if (fnv1a64(buf_.data(), payload_end_) != stored)
        throw ChecksumError("checksum mismatch: " + path);

    if (std::memcmp(buf_.data(), magic.data(), 4) != 0)
        throw VersionError("bad magic in " + path);
    pos_ = 4;
    uint32_t version = u32();
    if (version != expect_version)
        throw VersionError("unsupported version " + std::to_string(version) + " in " + path +
                           " (expected " + std::to_string(expect_version) + ")");
}

void BinReader::raw(void* p, size_t n) {
    if (pos_ + n > payload_end_) throw TruncationError("unexpected end of payload");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
}

uint32_t BinReader::u32() {
    uint32_t v;
    raw(&v, sizeof v);
    return v;
}
uint64_t BinReader::u64() {
    uint64_t v;
    raw(&v, sizeof v);
    return v;
}
int64_t BinReader::i64() {
    int64_t v;
    raw(&v, sizeof v);
    return v;
}
double BinReader::f64() {
    double v;
    raw(&v, sizeof v);
    return v;
}

std::string BinReader::str() {
    uint64_t n = u64();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

Tensor BinReader::tensor() {
    uint32_t rank = u32();
    if (rank > 8) throw IoError("implausible tensor rank");
    std::vector<int> shape(rank);
    for (auto& e : shape) e = static_cast<int>(u32());
    Tensor t(shape);
    raw(t.data.data(), t.data.size() * sizeof(double));
    return t;
}

std::vector<double> BinReader::f64_vec() {
    uint64_t n = u64();
    if (n * sizeof(double) > payload_end_) throw TruncationError("vector longer than payload");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
}

std::vector<int> BinReader::int_vec() {
    uint64_t n = u64();
    if (n * sizeof(int) > payload_end_) throw TruncationError("vector longer than payload");
    std::vector<int> v(n);
    raw(v.data(), n * sizeof(int));
    return v;
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a64(buf.data(), buf.size());
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            size_t b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        std::string stripped = strip(line);
        if (stripped.empty()) continue;
        auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw IoError("config line " + std::to_string(lineno) + ": expected key = value");
        kv.entries.emplace_back(strip(stripped.substr(0, eq)), strip(stripped.substr(eq + 1)));
    }
    return kv;
}

KvFile KvFile::load(const std::string& path) { return parse(read_text_file(path)); }

bool KvFile::has(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return true;
    return false;
}

std::string KvFile::get(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    throw IoError("missing config key: " + key);
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? get(key) : fallback;
}

std::vector<std::string> KvFile::all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
        if (k == key) out.push_back(v);
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace geofusion
