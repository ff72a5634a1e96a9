#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include "occmil/bag_io.hpp"
#include "occmil/error.hpp"
#include "occmil/model.hpp"
#include "occmil/ocsvm.hpp"

namespace occmil {

// Model checkpoint:
//   "MBHP" | version u16 | d_in u32 | d_ref u32 | D u32 |
//   eleven tensors in field order, each u64 count + count f64 little-endian
inline constexpr char kModelMagic[4] = {'M', 'B', 'H', 'P'};
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string encode_model(const ModelParams& p) {
    std::string out;
    detail::put_bytes(out, kModelMagic, 4);
    detail::put_u16(out, kModelVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(p.d_in));
    detail::put_u32(out, static_cast<std::uint32_t>(p.d_ref));
    detail::put_u32(out, static_cast<std::uint32_t>(p.att_dim));
    for (const auto* tensor : tensor_data(p)) {
        detail::put_u64(out, tensor->size());
        for (double x : *tensor) detail::put_f64(out, x);
    }
    return out;
}

inline void save_model(const ModelParams& p, const std::filesystem::path& path) {
    detail::spew(path, encode_model(p));
}

inline ModelParams load_model(const std::filesystem::path& path) {
    const std::string bytes = detail::slurp(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
        fail(ErrorCode::BadMagic, "'" + path.string() + "' is not a model checkpoint");
    }
    detail::Reader r(bytes, path.string());
    r.pos = 4;
    if (r.u16() != kModelVersion) {
        fail(ErrorCode::CorruptHeader, "'" + path.string() + "': unsupported checkpoint version");
    }
    const std::size_t d_in = r.u32();
    const std::size_t d_ref = r.u32();
    const std::size_t att_dim = r.u32();
    if (d_in == 0 || d_ref == 0 || att_dim == 0) {
        fail(ErrorCode::CorruptHeader, "'" + path.string() + "': zero model dims");
    }
    ModelParams p;
    p.d_in = d_in;
    p.d_ref = d_ref;
    p.att_dim = att_dim;
    p.W_refine = DMat(d_in, d_ref);
    p.V_att = DMat(d_ref, att_dim);
    p.U_att = DMat(d_ref, att_dim);
    p.W_neg = DMat(d_ref, 2);
    p.W_pos = DMat(d_ref, 2);
    p.W_bag = DMat(d_ref, 2);
    p.b_refine.resize(d_ref);
    p.w_att.resize(att_dim);
    p.b_neg.resize(2);
    p.b_pos.resize(2);
    p.b_bag.resize(2);
    for (auto* tensor : tensor_data(p)) {
        const std::uint64_t n = r.u64();
        if (n != tensor->size()) {
            fail(ErrorCode::CorruptHeader,
                 "'" + path.string() + "': tensor length does not match header dims");
        }
        for (auto& x : *tensor) {
            x = r.f64();
            if (!std::isfinite(x)) {
                fail(ErrorCode::NonFinite, "'" + path.string() + "': non-finite parameter");
            }
        }
    }
    if (r.pos != bytes.size()) {
        fail(ErrorCode::CorruptHeader, "'" + path.string() + "': trailing bytes");
    }
    return p;
}

// OCSVM sidecar (written next to the model checkpoint, extension .mbho):
//   "MBHO" | version u16 | dim u32 | nu f64 | rho f64 | epochs u32 |
//   final_objective f64 | u64 count + count f64 (w)
inline constexpr char kOcsvmMagic[4] = {'M', 'B', 'H', 'O'};
inline constexpr std::uint16_t kOcsvmVersion = 1;

inline void save_ocsvm(const OcsvmState& s, const std::filesystem::path& path) {
    std::string out;
    detail::put_bytes(out, kOcsvmMagic, 4);
    detail::put_u16(out, kOcsvmVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(s.w.size()));
    detail::put_f64(out, s.nu);
    detail::put_f64(out, s.rho);
    detail::put_u32(out, static_cast<std::uint32_t>(s.epochs_run));
    detail::put_f64(out, s.final_objective);
    detail::put_u64(out, s.w.size());
    for (double x : s.w) detail::put_f64(out, x);
    detail::spew(path, out);
}

inline OcsvmState load_ocsvm(const std::filesystem::path& path) {
    const std::string bytes = detail::slurp(path);
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kOcsvmMagic, 4) != 0) {
        fail(ErrorCode::BadMagic, "'" + path.string() + "' is not an OCSVM file");
    }
    detail::Reader r(bytes, path.string());
    r.pos = 4;
    if (r.u16() != kOcsvmVersion) {
        fail(ErrorCode::CorruptHeader, "'" + path.string() + "': unsupported OCSVM version");
    }
    OcsvmState s;
    const std::size_t dim = r.u32();
    s.nu = r.f64();
    s.rho = r.f64();
    s.epochs_run = static_cast<int>(r.u32());
    s.final_objective = r.f64();
    const std::uint64_t n = r.u64();
    if (n != dim) fail(ErrorCode::CorruptHeader, "'" + path.string() + "': bad w length");
    s.w.resize(dim);
    for (auto& x : s.w) {
        x = r.f64();
        if (!std::isfinite(x)) fail(ErrorCode::NonFinite, "'" + path.string() + "': non-finite w");
    }
    if (r.pos != bytes.size()) {
        fail(ErrorCode::CorruptHeader, "'" + path.string() + "': trailing bytes");
    }
    return s;
}

}  // namespace occmil
