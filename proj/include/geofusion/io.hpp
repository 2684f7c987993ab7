#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "geofusion/tensor.hpp"

namespace geofusion {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct VersionError : IoError {
    using IoError::IoError;
};
struct TruncationError : IoError {
    using IoError::IoError;
};
struct ChecksumError : IoError {
    using IoError::IoError;
};

// Versioned little-endian binary container: 4-byte magic, u32 version,
// payload, trailing FNV-1a 64 checksum over everything before it.
class BinWriter {
public:
    BinWriter(const std::string& magic, uint32_t version);

    void u32(uint32_t v);
    void u64(uint64_t v);
    void i64(int64_t v);
    void f64(double v);
    void str(const std::string& s);
    void tensor(const Tensor& t);
    void f64_vec(const std::vector<double>& v);
    void int_vec(const std::vector<int>& v);

    // appends the checksum and writes the buffer to path
    void save(const std::string& path);
    const std::vector<uint8_t>& buffer() const { return buf_; }

private:
    void raw(const void* p, size_t n);
    std::vector<uint8_t> buf_;
};

class BinReader {
public:
    // loads the whole file, verifies magic, version and trailing checksum
    BinReader(const std::string& path, const std::string& magic, uint32_t expect_version);

    uint32_t u32();
    uint64_t u64();
    int64_t i64();
    double f64();
    std::string str();
    Tensor tensor();
    std::vector<double> f64_vec();
    std::vector<int> int_vec();

    bool at_end() const { return pos_ == payload_end_; }

private:
    void raw(void* p, size_t n);
    std::vector<uint8_t> buf_;
    size_t pos_ = 0;
    size_t payload_end_ = 0;
};

uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t seed = 14695981039346656037ull);
uint64_t file_checksum(const std::string& path);

// Plain key = value text, one pair per line, '#' comments. Repeated keys
// accumulate in order.
struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    static KvFile parse(const std::string& text);
    static KvFile load(const std::string& path);
    bool has(const std::string& key) const;
    std::string get(const std::string& key) const;  // throws if missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::vector<std::string> all(const std::string& key) const;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace geofusion
