// metrics.hpp
// Scene scoring and report aggregation in the style of per-method,
// per-azimuth-bucket mean SI-SDR tables.
#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "beamkit/common.hpp"
#include "beamkit/dataset.hpp"
#include "beamkit/losses.hpp"

namespace beamkit {

struct EvalRecord {
    int scene_id = 0;
    std::string method;
    double si_sdr_db = 0.0;
    int bucket = 0;  // index into bucket_label
};

inline EvalRecord score(const std::vector<double>& estimate, const std::vector<double>& reference,
                        const SceneRecord& meta, const std::string& method) {
    EvalRecord r;
    r.scene_id = meta.id;
    r.method = method;
    r.si_sdr_db = si_sdr_db(estimate, reference);
    r.bucket = azimuth_bucket(meta.target_doa_deg - meta.interferer_doa_deg);
    return r;
}

struct ReportRow {
    std::string method;
    double bucket_mean[4] = {0, 0, 0, 0};
    int bucket_count[4] = {0, 0, 0, 0};
    double overall_mean = 0.0;  // sample mean over all scenes, not mean of bucket means
    int total = 0;
};

struct ReportTable {
    std::vector<ReportRow> rows;  // ordered by method name
};

inline ReportTable report(const std::vector<EvalRecord>& records) {
    require(!records.empty(), "report: no records");
    std::map<std::string, ReportRow> by_method;
    for (const auto& r : records) {
        auto& row = by_method[r.method];
        row.method = r.method;
        row.bucket_mean[r.bucket] += r.si_sdr_db;
        row.bucket_count[r.bucket]++;
        row.overall_mean += r.si_sdr_db;
        row.total++;
    }
    ReportTable table;
    for (auto& [name, row] : by_method) {
        for (int b = 0; b < 4; b++)
            if (row.bucket_count[b] > 0) row.bucket_mean[b] /= row.bucket_count[b];
        row.overall_mean /= row.total;
        table.rows.push_back(row);
    }
    return table;
}

inline void write_report_csv(const std::string& path, const ReportTable& table) {
    std::ofstream out(path);
    require(out.good(), "cannot open for writing: " + path);
    out << "method,bucket,count,mean_si_sdr_db\n";
    for (const auto& row : table.rows) {
        for (int b = 0; b < 4; b++)
            out << row.method << "," << bucket_label(b) << "," << row.bucket_count[b] << ","
                << (row.bucket_count[b] ? row.bucket_mean[b] : 0.0) << "\n";
        out << row.method << ",overall," << row.total << "," << row.overall_mean << "\n";
    }
    require(out.good(), "write failed: " + path);
}

}  // namespace beamkit
