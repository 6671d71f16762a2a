#pragma once

// Column-oriented experiment traces with a strict CSV writer. Column names
// carry their SI unit as a suffix (q_C, R_ohm, t_s); dimensionless counters
// stay bare (cycle, phase). Numbers serialize through format_double so reruns
// are byte-identical.

#include <filesystem>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionx/common.hpp"

namespace ionx {

class Trace {
public:
    explicit Trace(std::string name);

    const std::string& name() const { return name_; }

    /// Appends a column; rejects duplicates and is only valid while empty.
    int add_column(const std::string& column);

    /// Marks an existing column as the time axis; appended values must then be
    /// strictly increasing.
    void set_time_column(const std::string& column);

    void append_row(std::initializer_list<double> values);
    void append_row(std::span<const double> values);

    std::size_t row_count() const;
    const std::vector<std::string>& column_names() const { return names_; }
    bool has_column(const std::string& column) const;
    const std::vector<double>& column(const std::string& column) const;

    nlohmann::json& metadata() { return metadata_; }
    const nlohmann::json& metadata() const { return metadata_; }

    void write_csv(std::ostream& out) const;
    std::string csv_body() const;

private:
    int column_index(const std::string& column) const;

    std::string name_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    int time_column_ = -1;
    nlohmann::json metadata_;
};

/// Reads a CSV produced by write_csv (header + numeric rows).
Trace read_trace_csv(const std::filesystem::path& path);

struct TraceFiles {
    std::filesystem::path csv;
    std::filesystem::path sidecar;
};

/// Writes `<stem>.csv` plus a `<stem>.json` sidecar carrying the metadata.
/// Both files land atomically (write to a temporary, then rename).
TraceFiles write_trace_files(const Trace& trace, const std::filesystem::path& dir,
                             const std::string& stem);

/// Writes `body` to `path` via a temporary plus rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& body);

}  // namespace ionx
