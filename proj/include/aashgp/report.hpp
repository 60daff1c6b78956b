#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aashgp/baselines.hpp"
#include "aashgp/config.hpp"
#include "aashgp/learner.hpp"

namespace aashgp::report {

using Eigen::Index;

using nlohmann::json;

inline constexpr const char* kSchema = "aashgp.report/1";

json hgp_params_to_json(const gp::HgpParams& p);

json run_report(const config::RunConfig& config, const learner::RunRecord& record, double seconds);
json mcs_report(const config::RunConfig& config, const baselines::McsResult& result, double seconds);
json form_report(const config::RunConfig& config, const baselines::FormResult& result, double seconds);

/// Schema violations, empty when the report is valid.
std::vector<std::string> validate_report(const json& report);

/// Shortest round-trip decimal; "" for NaN, "inf"/"-inf" for infinities.
std::string format_number(double v);
/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& fields);

private:
    std::ofstream out_;
    std::size_t columns_;
};

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

/// iteration, pf, eps1, eps2, d_r, lambda_1..lambda_8, n_s
void write_history_csv(const std::filesystem::path& path, const learner::RunRecord& record);
/// psi_1..psi_dr, y_pred, y_true, label (safe | failure)
void write_features_csv(const std::filesystem::path& path, const learner::RunRecord& record, double y_f);
/// iteration, index, eigenvalue
void write_spectrum_csv(const std::filesystem::path& path, const learner::RunRecord& record);
/// iteration, d_r, eps_d, threshold, accepted
void write_trials_csv(const std::filesystem::path& path, const learner::RunRecord& record);

struct ComparisonRow {
    std::string method;
    std::string source;
    double pf = 0.0;
    std::optional<long long> n_s;
    std::optional<long long> n_g;
    double beta_g = 0.0;
    double eps_p = 0.0;  // relative error against the reference, in percent
};

double relative_error(double pf, double reference_pf);

/// One row per report, eps_p measured against `reference`.
std::vector<ComparisonRow> compare(const std::vector<json>& reports, const std::vector<std::string>& sources,
                                   const json& reference);
void write_comparison_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows);
std::string comparison_markdown(const std::vector<ComparisonRow>& rows);

}  // namespace aashgp::report
