#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"

namespace occmil {

// BAGF container, little-endian throughout:
//   "MBHB" | version u16 | flags u16 (bit 0: coords) |
//   bag_id_len u16, bag_id | case_id_len u16, case_id |
//   label i8 (-1 unknown, 0 neg, 1 pos) | reserved u8 |
//   K u32 | dim u32 | [K pairs of i32 (col,row)] | K*dim f32 row-major
inline constexpr char kBagMagic[4] = {'M', 'B', 'H', 'B'};
inline constexpr std::uint16_t kBagVersion = 1;

namespace detail {

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
}

inline void put_u16(std::string& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                                static_cast<unsigned char>(v >> 8)};
    put_bytes(out, b, 2);
}

inline void put_u32(std::string& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    put_bytes(out, b, 4);
}

inline void put_u64(std::string& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    put_bytes(out, b, 8);
}

inline void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

// Bounds-checked little-endian reader over an in-memory buffer.
struct Reader {
    const unsigned char* p;
    std::size_t len;
    std::size_t pos = 0;
    std::string name;

    Reader(const std::string& buf, std::string file)
        : p(reinterpret_cast<const unsigned char*>(buf.data())), len(buf.size()), name(std::move(file)) {}

    void need(std::size_t n) const {
        if (pos + n > len) {
            fail(ErrorCode::CorruptHeader, "'" + name + "': truncated (need " + std::to_string(n) +
                                               " bytes at offset " + std::to_string(pos) + ")");
        }
    }

    std::uint16_t u16() {
        need(2);
        std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | p[pos + i];
        pos += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | p[pos + i];
        pos += 8;
        return v;
    }

    std::int8_t i8() {
        need(1);
        return static_cast<std::int8_t>(p[pos++]);
    }

    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }

    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

inline std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) fail(ErrorCode::IoFailure, "read failed for '" + path.string() + "'");
    return std::move(ss).str();
}

inline void spew(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, "cannot create '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorCode::IoFailure, "write failed for '" + path.string() + "'");
}

}  // namespace detail

inline std::string encode_bag(const Bag& bag) {
    validate_bag(bag);
    if (bag.bag_id.size() > 0xFFFF || bag.case_id.size() > 0xFFFF) {
        fail(ErrorCode::InvalidBag, "bag/case id longer than 65535 bytes");
    }
    const bool coords = bag.instances.front().coord.has_value();
    std::string out;
    detail::put_bytes(out, kBagMagic, 4);
    detail::put_u16(out, kBagVersion);
    detail::put_u16(out, coords ? 1 : 0);
    detail::put_u16(out, static_cast<std::uint16_t>(bag.bag_id.size()));
    out += bag.bag_id;
    detail::put_u16(out, static_cast<std::uint16_t>(bag.case_id.size()));
    out += bag.case_id;
    out.push_back(static_cast<char>(static_cast<int>(bag.label)));
    out.push_back('\0');  // reserved
    detail::put_u32(out, static_cast<std::uint32_t>(bag.size()));
    detail::put_u32(out, static_cast<std::uint32_t>(bag.feature_dim()));
    if (coords) {
        for (const auto& inst : bag.instances) {
            detail::put_i32(out, inst.coord->first);
            detail::put_i32(out, inst.coord->second);
        }
    }
    for (const auto& inst : bag.instances) {
        for (float v : inst.values) detail::put_f32(out, v);
    }
    return out;
}

inline void write_bag(const Bag& bag, const std::filesystem::path& path) {
    detail::spew(path, encode_bag(bag));
}

inline Bag decode_bag(const std::string& bytes, const std::string& name) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kBagMagic, 4) != 0) {
        fail(ErrorCode::BadMagic, "'" + name + "' is not a BAGF file");
    }
    detail::Reader r(bytes, name);
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kBagVersion) {
        fail(ErrorCode::CorruptHeader, "'" + name + "': unsupported version " + std::to_string(version));
    }
    const std::uint16_t flags = r.u16();
    if (flags > 1) fail(ErrorCode::CorruptHeader, "'" + name + "': unknown flag bits");
    Bag bag;
    bag.bag_id = r.str(r.u16());
    bag.case_id = r.str(r.u16());
    const int label = r.i8();
    if (label < -1 || label > 1) {
        fail(ErrorCode::CorruptHeader, "'" + name + "': bad label byte " + std::to_string(label));
    }
    bag.label = static_cast<Label>(label);
    r.u8();  // reserved
    const std::uint32_t k = r.u32();
    const std::uint32_t dim = r.u32();
    if (k == 0 || dim == 0) {
        fail(ErrorCode::CorruptHeader, "'" + name + "': K and dim must be >= 1");
    }
    const bool coords = (flags & 1) != 0;
    const std::size_t payload =
        static_cast<std::size_t>(k) * dim * 4 + (coords ? static_cast<std::size_t>(k) * 8 : 0);
    if (bytes.size() - r.pos != payload) {
        fail(ErrorCode::CorruptHeader, "'" + name + "': payload size " +
                                           std::to_string(bytes.size() - r.pos) + " != expected " +
                                           std::to_string(payload));
    }
    bag.instances.resize(k);
    if (coords) {
        for (auto& inst : bag.instances) {
            const std::int32_t col = r.i32();
            const std::int32_t row = r.i32();
            inst.coord = {col, row};
        }
    }
    for (auto& inst : bag.instances) {
        inst.values.resize(dim);
        for (std::uint32_t d = 0; d < dim; ++d) {
            const float v = r.f32();
            if (!std::isfinite(v)) {
                fail(ErrorCode::NonFinite, "'" + name + "': non-finite feature value");
            }
            inst.values[d] = v;
        }
    }
    return bag;
}

inline Bag read_bag(const std::filesystem::path& path) {
    return decode_bag(detail::slurp(path), path.string());
}

// ---------------------------------------------------------------------------
// Manifest: UTF-8 CSV `bag_id,case_id,label,path`. Relative paths resolve
// against the manifest's directory.
// ---------------------------------------------------------------------------

struct ManifestEntry {
    std::string bag_id;
    std::string case_id;
    Label label = Label::Unknown;
    std::string path;
};

inline constexpr const char* kManifestHeader = "bag_id,case_id,label,path";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline void write_manifest(const std::vector<ManifestEntry>& entries,
                           const std::filesystem::path& path) {
    std::string out = std::string(kManifestHeader) + "\n";
    for (const auto& e : entries) {
        out += e.bag_id + "," + e.case_id + "," + label_name(e.label) + "," + e.path + "\n";
    }
    detail::spew(path, out);
}

inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
    std::istringstream in(detail::slurp(path));
    std::string line;
    if (!std::getline(in, line) || detail::split_csv_line(line) != detail::split_csv_line(kManifestHeader)) {
        fail(ErrorCode::InvalidConfig, "'" + path.string() + "': missing manifest header");
    }
    std::vector<ManifestEntry> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cols = detail::split_csv_line(line);
        if (cols.size() != 4) {
            fail(ErrorCode::InvalidConfig, "'" + path.string() + "' line " + std::to_string(lineno) +
                                               ": want 4 columns, got " + std::to_string(cols.size()));
        }
        entries.push_back({cols[0], cols[1], label_from_name(cols[2]), cols[3]});
    }
    return entries;
}

// Loads every bag named by the manifest and cross-checks ids and labels
// against the BAGF contents.
inline Dataset load_manifest(const std::filesystem::path& manifest_path) {
    const auto entries = read_manifest(manifest_path);
    if (entries.empty()) fail(ErrorCode::InvalidConfig, "'" + manifest_path.string() + "': no bags listed");
    const auto base = manifest_path.parent_path();
    Dataset ds;
    ds.bags.reserve(entries.size());
    for (const auto& e : entries) {
        std::filesystem::path p(e.path);
        if (p.is_relative()) p = base / p;
        Bag bag = read_bag(p);
        if (bag.bag_id != e.bag_id || bag.case_id != e.case_id) {
            fail(ErrorCode::LabelConflict, "'" + p.string() + "': ids disagree with manifest row '" +
                                               e.bag_id + "'");
        }
        if (bag.label != e.label) {
            fail(ErrorCode::LabelConflict,
                 "'" + p.string() + "': label disagrees with manifest row '" + e.bag_id + "'");
        }
        ds.bags.push_back(std::move(bag));
    }
    ds.feature_dim = ds.bags.front().feature_dim();
    validate_dataset(ds);
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic truth sidecar: CSV `bag_id,instance_index,truth`.
// ---------------------------------------------------------------------------

inline constexpr const char* kTruthHeader = "bag_id,instance_index,truth";

inline void write_truth_csv(const Dataset& ds, const std::filesystem::path& path) {
    if (!ds.truths.has_value()) fail(ErrorCode::InvalidConfig, "dataset has no truth labels");
    std::string out = std::string(kTruthHeader) + "\n";
    for (std::size_t b = 0; b < ds.bags.size(); ++b) {
        const auto& labels = (*ds.truths)[b].labels;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            out += ds.bags[b].bag_id + "," + std::to_string(i) + "," + truth_name(labels[i]) + "\n";
        }
    }
    detail::spew(path, out);
}

// Returns truths aligned with ds.bags; every instance must be covered.
inline std::vector<SyntheticTruth> read_truth_csv(const Dataset& ds,
                                                  const std::filesystem::path& path) {
    std::istringstream in(detail::slurp(path));
    std::string line;
    if (!std::getline(in, line) ||
        detail::split_csv_line(line) != detail::split_csv_line(kTruthHeader)) {
        fail(ErrorCode::InvalidConfig, "'" + path.string() + "': missing truth header");
    }
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t b = 0; b < ds.bags.size(); ++b) index[ds.bags[b].bag_id] = b;
    std::vector<SyntheticTruth> truths(ds.bags.size());
    for (std::size_t b = 0; b < ds.bags.size(); ++b) {
        truths[b].labels.assign(ds.bags[b].size(), InstanceTruth::Negative);
    }
    std::vector<std::size_t> seen(ds.bags.size(), 0);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto cols = detail::split_csv_line(line);
        if (cols.size() != 3) {
            fail(ErrorCode::InvalidConfig,
                 "'" + path.string() + "' line " + std::to_string(lineno) + ": want 3 columns");
        }
        auto it = index.find(cols[0]);
        if (it == index.end()) {
            fail(ErrorCode::InvalidConfig, "'" + path.string() + "' line " + std::to_string(lineno) +
                                               ": unknown bag_id '" + cols[0] + "'");
        }
        const std::size_t b = it->second;
        const std::size_t i = static_cast<std::size_t>(std::stoull(cols[1]));
        if (i >= truths[b].labels.size()) {
            fail(ErrorCode::InvalidConfig, "'" + path.string() + "' line " + std::to_string(lineno) +
                                               ": instance index out of range");
        }
        truths[b].labels[i] = truth_from_name(cols[2]);
        ++seen[b];
    }
    for (std::size_t b = 0; b < ds.bags.size(); ++b) {
        if (seen[b] != ds.bags[b].size()) {
            fail(ErrorCode::InvalidConfig,
                 "'" + path.string() + "': incomplete truth rows for bag '" + ds.bags[b].bag_id + "'");
        }
    }
    return truths;
}

}  // namespace occmil
