#include "ionx/trace.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace ionx {

Trace::Trace(std::string name) : name_(std::move(name)) {
    if (name_.empty()) throw_usage("TRACE_NAME", "a trace needs a non-empty name");
}

int Trace::add_column(const std::string& column) {
    if (column.empty() || column.find(',') != std::string::npos ||
        column.find('\n') != std::string::npos)
        throw_usage("TRACE_COLUMN", "column names must be non-empty and CSV-safe");
    if (has_column(column))
        throw_usage("TRACE_COLUMN", "duplicate column '" + column + "'");
    if (row_count() > 0)
        throw_usage("TRACE_COLUMN", "cannot add columns after rows");
    names_.push_back(column);
    columns_.emplace_back();
    return static_cast<int>(names_.size()) - 1;
}

int Trace::column_index(const std::string& column) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
        if (names_[k] == column) return static_cast<int>(k);
    return -1;
}

bool Trace::has_column(const std::string& column) const {
    return column_index(column) >= 0;
}

void Trace::set_time_column(const std::string& column) {
    const int idx = column_index(column);
    if (idx < 0) throw_usage("UNKNOWN_COLUMN", "no column '" + column + "'");
    time_column_ = idx;
}

void Trace::append_row(std::initializer_list<double> values) {
    append_row(std::span<const double>(values.begin(), values.size()));
}

void Trace::append_row(std::span<const double> values) {
    if (values.size() != names_.size())
        throw_usage("TRACE_SHAPE", "row width " + std::to_string(values.size()) +
                                       " does not match " +
                                       std::to_string(names_.size()) + " columns");
    if (time_column_ >= 0 && !columns_[time_column_].empty()) {
        const double prev = columns_[time_column_].back();
        if (!(values[static_cast<std::size_t>(time_column_)] > prev))
            throw_usage("TRACE_TIME", "time column must be strictly increasing");
    }
    for (std::size_t k = 0; k < names_.size(); ++k) columns_[k].push_back(values[k]);
}

std::size_t Trace::row_count() const {
    return columns_.empty() ? 0 : columns_.front().size();
}

const std::vector<double>& Trace::column(const std::string& column) const {
    const int idx = column_index(column);
    if (idx < 0) throw_usage("UNKNOWN_COLUMN", "no column '" + column + "'");
    return columns_[static_cast<std::size_t>(idx)];
}

void Trace::write_csv(std::ostream& out) const {
    for (std::size_t k = 0; k < names_.size(); ++k)
        out << (k ? "," : "") << names_[k];
    out << "\n";
    const std::size_t rows = row_count();
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t k = 0; k < names_.size(); ++k)
            out << (k ? "," : "") << format_double(columns_[k][r]);
        out << "\n";
    }
}

std::string Trace::csv_body() const {
    std::ostringstream out;
    write_csv(out);
    return out.str();
}

Trace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw_usage("TRACE_MISSING_FILE", "cannot open trace " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw_usage("TRACE_FORMAT", "empty trace file " + path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    Trace trace(path.stem().string().empty() ? "trace" : path.stem().string());
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        trace.add_column(line.substr(start, comma - start));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }

    std::vector<double> row(trace.column_names().size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::size_t pos = 0;
        for (std::size_t k = 0; k < row.size(); ++k) {
            const std::size_t comma = line.find(',', pos);
            const std::string field = line.substr(pos, comma - pos);
            const char* first = field.data();
            const char* last = field.data() + field.size();
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last)
                throw_usage("TRACE_FORMAT", "bad number '" + field + "' at " +
                                                path.string() + ":" +
                                                std::to_string(line_no));
            row[k] = v;
            if (comma == std::string::npos) {
                if (k + 1 != row.size())
                    throw_usage("TRACE_FORMAT", "short row at " + path.string() + ":" +
                                                    std::to_string(line_no));
                pos = std::string::npos;
            } else {
                pos = comma + 1;
            }
        }
        if (pos != std::string::npos)
            throw_usage("TRACE_FORMAT",
                        "extra fields at " + path.string() + ":" + std::to_string(line_no));
        trace.append_row(row);
    }
    return trace;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& body) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw_runtime("IO", "cannot write " + tmp.string());
        out << body;
        if (!out.good()) throw_runtime("IO", "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

TraceFiles write_trace_files(const Trace& trace, const std::filesystem::path& dir,
                             const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw_runtime("IO", "cannot create output directory " + dir.string());

    TraceFiles files;
    files.csv = dir / (stem + ".csv");
    files.sidecar = dir / (stem + ".json");
    write_file_atomic(files.csv, trace.csv_body());

    nlohmann::json sidecar{
        {"schema_version", 1},
        {"trace", trace.name()},
        {"columns", trace.column_names()},
        {"rows", trace.row_count()},
        {"metadata", trace.metadata()},
    };
    write_file_atomic(files.sidecar, sidecar.dump(2) + "\n");
    return files;
}

}  // namespace ionx
