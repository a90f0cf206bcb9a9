#ifndef HETCGGM_IO_HPP
#define HETCGGM_IO_HPP

#include "hetcggm/core.hpp"
#include "hetcggm/simulate.hpp"

#include <json.hpp>

#include <string>
#include <vector>

// File formats: CSV matrices with full round-trip numeric precision,
// and the JSON schemas (format_version "1") shared by the CLI
// commands. X on disk never carries the intercept column; the loader
// prepends it.

namespace hetcggm::io {

using json = nlohmann::json;

/// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

void write_matrix_csv(const std::string& path, const Matrix<double>& m,
                      const std::vector<std::string>& header);
/// Throws with the 1-based line number on malformed content.
Matrix<double> read_matrix_csv(const std::string& path, std::vector<std::string>* header = nullptr);

void write_labels_csv(const std::string& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::string& path);

void write_json_file(const std::string& path, const json& j);
json read_json_file(const std::string& path);

/// Dense row-major array serialization of one group's matrices.
json group_to_json(const GroupParams<double>& g);
GroupParams<double> group_from_json(const json& j, Index p, Index q);

json truth_to_json(const GroundTruth<double>& truth, Index p, Index q);
GroundTruth<double> truth_from_json(const json& j, Index* p_out = nullptr, Index* q_out = nullptr);

/// Everything cmd_fit writes into result.json.
struct FitRecord {
    FitResult<double> result;
    Index p = 0, q = 0, n = 0;
    int k = 0;
    double lambda1 = 0, lambda2 = 0, lambda3 = 0;
    std::uint64_t seed = 0;
    double wall_time_sec = 0;
    std::vector<std::string> warnings;
};

json fit_record_to_json(const FitRecord& rec);
FitRecord fit_record_from_json(const json& j);

}  // namespace hetcggm::io

#endif  // HETCGGM_IO_HPP
