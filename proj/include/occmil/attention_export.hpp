#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "occmil/bag.hpp"
#include "occmil/error.hpp"
#include "occmil/metrics.hpp"
#include "occmil/model.hpp"

namespace occmil {

struct AttentionRow {
    std::size_t index = 0;
    std::optional<std::pair<std::int32_t, std::int32_t>> coord;
    double raw = 0.0;
    double minmax = 0.0;
    bool top10 = false;
};

struct AttentionReport {
    std::string bag_id;
    std::vector<AttentionRow> rows;
};

// Min-max scaling plus top-10% flags (ceil(K/10) instances, index tie-break).
// Constant logits normalize to all zeros.
inline std::vector<AttentionRow> normalize_attention(const DVec& raw_logits) {
    const std::size_t k = raw_logits.size();
    if (k == 0) fail(ErrorCode::EmptyBag, "no attention logits");
    const auto [lo_it, hi_it] = std::minmax_element(raw_logits.begin(), raw_logits.end());
    const double lo = *lo_it, hi = *hi_it;
    std::vector<AttentionRow> rows(k);
    for (std::size_t j = 0; j < k; ++j) {
        rows[j].index = j;
        rows[j].raw = raw_logits[j];
        rows[j].minmax = (hi == lo) ? 0.0 : (raw_logits[j] - lo) / (hi - lo);
    }
    const std::size_t top_count = (k + 9) / 10;  // ceil(0.1 * K), exact in integers
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (rows[a].minmax != rows[b].minmax) return rows[a].minmax > rows[b].minmax;
        return a < b;
    });
    for (std::size_t i = 0; i < top_count; ++i) rows[order[i]].top10 = true;
    return rows;
}

inline AttentionReport attention_export(const ModelParams& params, const Bag& bag) {
    validate_bag(bag);
    const ForwardTrace trace = forward(params, bag);
    AttentionReport report;
    report.bag_id = bag.bag_id;
    report.rows = normalize_attention(trace.att_logits);
    for (std::size_t j = 0; j < bag.size(); ++j) report.rows[j].coord = bag.instances[j].coord;
    return report;
}

inline constexpr const char* kAttentionHeader =
    "bag_id,instance_index,col,row,raw_score,minmax_score,top10";

inline std::string attention_csv(const std::vector<AttentionReport>& reports) {
    std::string out = std::string(kAttentionHeader) + "\n";
    for (const auto& rep : reports) {
        for (const auto& row : rep.rows) {
            out += rep.bag_id + "," + std::to_string(row.index) + ",";
            if (row.coord.has_value()) {
                out += std::to_string(row.coord->first) + "," + std::to_string(row.coord->second);
            } else {
                out += ",";
            }
            out += "," + fmt_real(row.raw) + "," + fmt_real(row.minmax) + "," +
                   (row.top10 ? "1" : "0") + "\n";
        }
    }
    return out;
}

// Plain P5 heatmap; gray = round(255 * minmax), empty cells 0. The grid shape
// comes from the coord bounding box. Duplicate coords keep the hotter value.
inline std::string render_pgm(const AttentionReport& report) {
    if (report.rows.empty()) fail(ErrorCode::EmptyBag, "no rows to render");
    std::int64_t min_c = std::numeric_limits<std::int64_t>::max(), max_c = std::numeric_limits<std::int64_t>::min();
    std::int64_t min_r = min_c, max_r = max_c;
    for (const auto& row : report.rows) {
        if (!row.coord.has_value()) {
            fail(ErrorCode::InvalidConfig, "bag '" + report.bag_id + "' has no coords to render");
        }
        min_c = std::min<std::int64_t>(min_c, row.coord->first);
        max_c = std::max<std::int64_t>(max_c, row.coord->first);
        min_r = std::min<std::int64_t>(min_r, row.coord->second);
        max_r = std::max<std::int64_t>(max_r, row.coord->second);
    }
    const std::int64_t w = max_c - min_c + 1;
    const std::int64_t h = max_r - min_r + 1;
    if (w * h > (1ll << 24)) {
        fail(ErrorCode::InvalidConfig, "bag '" + report.bag_id + "' coord grid too large to render");
    }
    std::string grid(static_cast<std::size_t>(w * h), '\0');
    for (const auto& row : report.rows) {
        const std::size_t cell = static_cast<std::size_t>(
            (row.coord->second - min_r) * w + (row.coord->first - min_c));
        const unsigned char gray =
            static_cast<unsigned char>(std::llround(255.0 * row.minmax));
        grid[cell] = static_cast<char>(std::max<unsigned char>(gray, static_cast<unsigned char>(grid[cell])));
    }
    std::string out = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out += grid;
    return out;
}

}  // namespace occmil
