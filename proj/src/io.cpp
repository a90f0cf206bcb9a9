#include "hetcggm/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace hetcggm::io {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_matrix_csv(const std::string& path, const Matrix<double>& m,
                      const std::vector<std::string>& header) {
    if (static_cast<Index>(header.size()) != m.cols())
        throw std::invalid_argument("write_matrix_csv: header width mismatch");
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out += ',';
        out += header[j];
    }
    out += '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
        out += '\n';
    }
    write_text(path, out);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& path, std::size_t line_no) {
    double v = 0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw std::runtime_error(path + ": malformed number '" + s + "' at line " +
                                 std::to_string(line_no));
    return v;
}

}  // namespace

Matrix<double> read_matrix_csv(const std::string& path, std::vector<std::string>* header) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header at line 1");
    const std::vector<std::string> head = split_csv_line(line);
    const std::size_t width = (head.size() == 1 && head[0].empty()) ? 0 : head.size();
    if (header) *header = head;

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() && width == 0) {
            rows.emplace_back();
            continue;
        }
        if (line.empty()) continue;  // ignore trailing blank line
        const auto fields = split_csv_line(line);
        if (fields.size() != width)
            throw std::runtime_error(path + ": expected " + std::to_string(width) +
                                     " fields, got " + std::to_string(fields.size()) +
                                     " at line " + std::to_string(line_no));
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) row[j] = parse_double(fields[j], path, line_no);
        rows.push_back(std::move(row));
    }
    Matrix<double> m(rows.size(), width);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < width; ++j) m(i, j) = rows[i][j];
    return m;
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
    std::string out = "label\n";
    for (int v : labels) out += std::to_string(v) + "\n";
    write_text(path, out);
}

std::vector<int> read_labels_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": missing header at line 1");
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        int v = 0;
        const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc() || res.ptr != line.data() + line.size())
            throw std::runtime_error(path + ": malformed label at line " + std::to_string(line_no));
        labels.push_back(v);
    }
    return labels;
}

void write_json_file(const std::string& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

json read_json_file(const std::string& path) { return json::parse(read_text(path)); }

namespace {

json matrix_to_rowmajor(const Matrix<double>& m) {
    json arr = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) arr.push_back(m(i, j));
    return arr;
}

Matrix<double> matrix_from_rowmajor(const json& arr, Index rows, Index cols,
                                    const std::string& what) {
    if (static_cast<Index>(arr.size()) != rows * cols)
        throw std::runtime_error("JSON " + what + ": expected " + std::to_string(rows * cols) +
                                 " entries, got " + std::to_string(arr.size()));
    Matrix<double> m(rows, cols);
    Index k = 0;
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) m(i, j) = arr[k++].get<double>();
    return m;
}

}  // namespace

json group_to_json(const GroupParams<double>& g) {
    return json{{"gamma", matrix_to_rowmajor(g.gamma)}, {"theta", matrix_to_rowmajor(g.theta)}};
}

GroupParams<double> group_from_json(const json& j, Index p, Index q) {
    GroupParams<double> g;
    g.gamma = matrix_from_rowmajor(j.at("gamma"), p, q + 1, "gamma");
    g.theta = matrix_from_rowmajor(j.at("theta"), p, p, "theta");
    return g;
}

json truth_to_json(const GroundTruth<double>& truth, Index p, Index q) {
    json groups = json::array();
    for (const auto& g : truth.params) groups.push_back(group_to_json(g));
    return json{{"format_version", "1"},
                {"p", p},
                {"q", q},
                {"k0", truth.params.size()},
                {"groups", groups}};
}

GroundTruth<double> truth_from_json(const json& j, Index* p_out, Index* q_out) {
    const Index p = j.at("p").get<Index>();
    const Index q = j.at("q").get<Index>();
    GroundTruth<double> truth;
    for (const auto& gj : j.at("groups")) truth.params.push_back(group_from_json(gj, p, q));
    if (p_out) *p_out = p;
    if (q_out) *q_out = q;
    return truth;
}

json fit_record_to_json(const FitRecord& rec) {
    const auto& fr = rec.result;
    json groups = json::array();
    for (const auto& g : fr.merged_groups) groups.push_back(group_to_json(g));
    json j{{"format_version", "1"},
           {"p", rec.p},
           {"q", rec.q},
           {"n", rec.n},
           {"k", rec.k},
           {"seed", rec.seed},
           {"lambda1", rec.lambda1},
           {"lambda2", rec.lambda2},
           {"lambda3", rec.lambda3},
           {"k_hat", fr.k_hat},
           {"pi", std::vector<double>(fr.merged_pi.data(), fr.merged_pi.data() + fr.merged_pi.size())},
           {"groups", groups},
           {"assignment", fr.assignment},
           {"objective_trace", fr.objective_trace},
           {"em_converged", fr.em_converged},
           {"admm_converged", fr.admm_converged},
           {"em_iterations", fr.em_iterations},
           {"warnings", rec.warnings},
           {"wall_time_sec", rec.wall_time_sec}};
    if (std::isfinite(fr.hqc))
        j["hqc"] = fr.hqc;
    else
        j["hqc"] = nullptr;
    return j;
}

FitRecord fit_record_from_json(const json& j) {
    FitRecord rec;
    rec.p = j.at("p").get<Index>();
    rec.q = j.at("q").get<Index>();
    rec.n = j.at("n").get<Index>();
    rec.k = j.at("k").get<int>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.lambda1 = j.at("lambda1").get<double>();
    rec.lambda2 = j.at("lambda2").get<double>();
    rec.lambda3 = j.at("lambda3").get<double>();
    rec.wall_time_sec = j.at("wall_time_sec").get<double>();
    rec.warnings = j.at("warnings").get<std::vector<std::string>>();
    auto& fr = rec.result;
    fr.k_hat = j.at("k_hat").get<int>();
    const auto pi = j.at("pi").get<std::vector<double>>();
    fr.merged_pi = Eigen::Map<const Vector<double>>(pi.data(), pi.size());
    for (const auto& gj : j.at("groups"))
        fr.merged_groups.push_back(group_from_json(gj, rec.p, rec.q));
    fr.assignment = j.at("assignment").get<std::vector<int>>();
    fr.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    fr.em_converged = j.at("em_converged").get<bool>();
    fr.admm_converged = j.at("admm_converged").get<bool>();
    fr.em_iterations = j.at("em_iterations").get<int>();
    if (!j.at("hqc").is_null()) fr.hqc = j.at("hqc").get<double>();
    return rec;
}

}  // namespace hetcggm::io
