#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "wavelit/errors.hpp"
#include "wavelit/tensor.hpp"

// Versioned binary archive: magic "WLT1", u32 format version, then repeated
// records of (u32 name length, UTF-8 name, u32 rank, u64 extents, raw
// little-endian f64 payload). Everything the trainer needs to resume
// bitwise lives here: parameters, optimizer moments, EMA shadows, RNG
// counters.

namespace wavelit {

struct CheckpointRecord {
    std::string name;
    Shape shape;
    std::vector<double> data;
};

inline void save_checkpoint(const std::string& path, const std::vector<CheckpointRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("checkpoint: cannot open for writing: " + path);
    os.write("WLT1", 4);
    const std::uint32_t version = 1;
    os.write(reinterpret_cast<const char*>(&version), 4);
    for (const auto& r : records) {
        const auto name_len = static_cast<std::uint32_t>(r.name.size());
        os.write(reinterpret_cast<const char*>(&name_len), 4);
        os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        const auto rank = static_cast<std::uint32_t>(r.shape.size());
        os.write(reinterpret_cast<const char*>(&rank), 4);
        for (auto e : r.shape) {
            const auto ext = static_cast<std::uint64_t>(e);
            os.write(reinterpret_cast<const char*>(&ext), 8);
        }
        os.write(reinterpret_cast<const char*>(r.data.data()),
                 static_cast<std::streamsize>(sizeof(double) * r.data.size()));
    }
    if (!os) throw ConfigError("checkpoint: write failed: " + path);
}

inline std::vector<CheckpointRecord> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "WLT1") throw ConfigError("checkpoint: bad magic in " + path);
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (version != 1) throw ConfigError("checkpoint: unsupported version " + std::to_string(version));
    std::vector<CheckpointRecord> records;
    while (true) {
        std::uint32_t name_len = 0;
        is.read(reinterpret_cast<char*>(&name_len), 4);
        if (is.eof()) break;
        if (!is) throw ConfigError("checkpoint: truncated record header in " + path);
        CheckpointRecord r;
        r.name.resize(name_len);
        is.read(r.name.data(), name_len);
        std::uint32_t rank = 0;
        is.read(reinterpret_cast<char*>(&rank), 4);
        std::int64_t total = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            std::uint64_t ext = 0;
            is.read(reinterpret_cast<char*>(&ext), 8);
            r.shape.push_back(static_cast<std::int64_t>(ext));
            total *= static_cast<std::int64_t>(ext);
        }
        r.data.resize(static_cast<std::size_t>(total));
        is.read(reinterpret_cast<char*>(r.data.data()),
                static_cast<std::streamsize>(sizeof(double) * r.data.size()));
        if (!is) throw ConfigError("checkpoint: truncated payload for '" + r.name + "' in " + path);
        records.push_back(std::move(r));
    }
    return records;
}

}  // namespace wavelit
