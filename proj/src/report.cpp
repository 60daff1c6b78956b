#include "aashgp/report.hpp"

#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "aashgp/error.hpp"

namespace aashgp::report {

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json vector_json(const Eigen::VectorXd& v) {
    json a = json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(finite_or_null(v(i)));
    return a;
}

json kernel_json(const gp::SeArdKernel& k) {
    return {{"signal_variance", k.signal_variance}, {"lengthscales", vector_json(k.lengthscales)}};
}

json header(const config::RunConfig& config, const char* kind) {
    return {{"schema", kSchema},
            {"kind", kind},
            {"generator", rng::kGeneratorName},
            {"config", config.document},
            {"model",
             {{"name", config.model.name},
              {"dimension", config.model.dimension},
              {"threshold", config.model.threshold},
              {"negate", config.model.negate}}}};
}

json fit_json(const gp::FitInfo& f) {
    return {{"start_values", f.start_values},
            {"final_values", f.final_values},
            {"trace", f.trace},
            {"chosen_start", f.chosen_start},
            {"iterations", f.iterations},
            {"converged", f.converged}};
}

}  // namespace

json hgp_params_to_json(const gp::HgpParams& p) {
    return {{"kernel_f", kernel_json(p.kernel_f)},
            {"kernel_g", kernel_json(p.kernel_g)},
            {"mu0", p.mu0},
            {"lambda", vector_json(p.lambda)}};
}

json run_report(const config::RunConfig& config, const learner::RunRecord& record, double seconds) {
    json j = header(config, "aashgp");
    j["result"] = {{"pf", record.pf},
                   {"beta_g", finite_or_null(record.beta_g)},
                   {"n_s", record.n_s},
                   {"n_g", record.n_g},
                   {"status", learner::to_string(record.status)},
                   {"exit_code", learner::exit_code(record.status)},
                   {"message", record.message}};
    j["seconds"] = seconds;

    json history = json::array();
    for (const auto& it : record.iterations) {
        history.push_back({{"iteration", it.iteration},
                           {"pf", it.pf},
                           {"eps1", finite_or_null(it.eps1)},
                           {"eps2", finite_or_null(it.eps2)},
                           {"d_r", it.d_r},
                           {"n_s", it.n_s},
                           {"bound", finite_or_null(it.bound)},
                           {"critical_size", it.critical_size},
                           {"fallback", it.fallback},
                           {"seconds", it.seconds}});
    }
    json a = {{"mode", config.learner.mode == learner::Mode::GlobalDoe ? "global_doe" : "adaptive"},
              {"seed", config.learner.seed},
              {"iterations", record.iterations.size()},
              {"d_r", record.projection.d_r},
              {"d_converged", !record.iterations.empty() && record.iterations.back().d_converged},
              {"eigenvalues", vector_json(record.projection.eigenvalues)},
              {"spectral_gap", finite_or_null(record.projection.d_r > 0 ? record.projection.spectral_gap() : NAN)},
              {"history", history}};
    if (record.model) {
        a["surrogate"] = hgp_params_to_json(record.model->params());
        a["surrogate"]["y_offset"] = record.model->y_offset();
        a["surrogate"]["bound"] = finite_or_null(record.model->bound());
        a["surrogate"]["fit"] = fit_json(record.model->fit_info);
    }
    j["aashgp"] = a;
    return j;
}

json mcs_report(const config::RunConfig& config, const baselines::McsResult& r, double seconds) {
    json j = header(config, "mcs");
    j["result"] = {{"pf", r.pf},
                   {"beta_g", finite_or_null(learner::generalized_beta(r.pf))},
                   {"n_s", r.n},
                   {"n_g", nullptr},
                   {"status", "completed"},
                   {"exit_code", 0},
                   {"message", ""}};
    j["seconds"] = seconds;
    j["mcs"] = {{"n", r.n}, {"failures", r.failures}, {"cov", finite_or_null(r.cov)}, {"seed", r.seed}};
    return j;
}

json form_report(const config::RunConfig& config, const baselines::FormResult& r, double seconds) {
    json j = header(config, "form");
    j["result"] = {{"pf", r.pf},
                   {"beta_g", finite_or_null(r.beta)},
                   {"n_s", r.evaluations},
                   {"n_g", r.iterations},
                   {"status", r.converged ? "converged" : "max_iterations"},
                   {"exit_code", r.converged ? 0 : 2},
                   {"message", ""}};
    j["seconds"] = seconds;
    j["form"] = {{"beta", r.beta},
                 {"pf", r.pf},
                 {"u_star", vector_json(r.u_star)},
                 {"x_star", vector_json(r.x_star)},
                 {"iterations", r.iterations},
                 {"evaluations", r.evaluations},
                 {"converged", r.converged},
                 {"g_at_design", finite_or_null(r.g_at_design)}};
    return j;
}

std::vector<std::string> validate_report(const json& j) {
    std::vector<std::string> errors;
    auto need = [&](const json& obj, const std::string& where, const char* key, auto&& check, const char* what) {
        if (!obj.is_object() || !obj.contains(key)) {
            errors.push_back(where + "." + key + " is missing");
        } else if (!check(obj.at(key))) {
            errors.push_back(where + "." + key + " must be " + what);
        }
    };
    auto is_num = [](const json& v) { return v.is_number(); };
    auto is_num_or_null = [](const json& v) { return v.is_number() || v.is_null(); };
    auto is_count = [](const json& v) { return v.is_number_integer() && v.get<long long>() >= 0; };
    auto is_count_or_null = [](const json& v) { return v.is_null() || (v.is_number_integer() && v.get<long long>() >= 0); };
    auto is_str = [](const json& v) { return v.is_string(); };
    auto is_bool = [](const json& v) { return v.is_boolean(); };
    auto is_obj = [](const json& v) { return v.is_object(); };
    auto is_arr = [](const json& v) { return v.is_array(); };
    auto is_prob = [](const json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; };

    if (!j.is_object()) return {"report must be a JSON object"};
    need(j, "report", "schema", [](const json& v) { return v == kSchema; }, kSchema);
    need(j, "report", "kind", [](const json& v) { return v == "aashgp" || v == "mcs" || v == "form"; },
         "one of aashgp, mcs, form");
    need(j, "report", "generator", is_str, "a string");
    need(j, "report", "config", is_obj, "an object");
    need(j, "report", "seconds", is_num, "a number");
    need(j, "report", "model", is_obj, "an object");
    need(j, "report", "result", is_obj, "an object");
    if (!errors.empty()) return errors;

    const json& m = j["model"];
    need(m, "model", "name", is_str, "a string");
    need(m, "model", "dimension", is_count, "a non-negative integer");
    need(m, "model", "threshold", is_num, "a number");
    need(m, "model", "negate", is_bool, "a boolean");
    const json& r = j["result"];
    need(r, "result", "pf", is_prob, "a probability");
    need(r, "result", "beta_g", is_num_or_null, "a number or null");
    need(r, "result", "n_s", is_count, "a non-negative integer");
    need(r, "result", "n_g", is_count_or_null, "a non-negative integer or null");
    need(r, "result", "status", is_str, "a string");
    need(r, "result", "exit_code", [](const json& v) { return v == 0 || v == 1 || v == 2; }, "0, 1 or 2");
    need(r, "result", "message", is_str, "a string");

    const std::string kind = j["kind"];
    need(j, "report", kind.c_str(), is_obj, "an object");
    if (!errors.empty()) return errors;
    const json& k = j[kind];
    if (kind == "aashgp") {
        need(k, kind, "mode", [](const json& v) { return v == "adaptive" || v == "global_doe"; }, "adaptive or global_doe");
        need(k, kind, "seed", is_count, "a non-negative integer");
        need(k, kind, "iterations", is_count, "a non-negative integer");
        need(k, kind, "d_r", is_count, "a non-negative integer");
        need(k, kind, "eigenvalues", is_arr, "an array");
        need(k, kind, "history", is_arr, "an array");
    } else if (kind == "mcs") {
        need(k, kind, "n", is_count, "a non-negative integer");
        need(k, kind, "failures", is_count, "a non-negative integer");
        need(k, kind, "cov", is_num_or_null, "a number or null");
        need(k, kind, "seed", is_count, "a non-negative integer");
    } else {
        need(k, kind, "beta", is_num, "a number");
        need(k, kind, "u_star", is_arr, "an array");
        need(k, kind, "iterations", is_count, "a non-negative integer");
        need(k, kind, "converged", is_bool, "a boolean");
    }
    return errors;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw Error("cannot write " + path.string());
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_) throw Error("CSV row has the wrong number of fields");
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_field(fields[i]);
    }
    out_ << "\r\n";
    if (!out_) throw Error("CSV write failed");
}

void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw Error("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

void write_history_csv(const std::filesystem::path& path, const learner::RunRecord& record) {
    std::vector<std::string> header{"iteration", "pf", "eps1", "eps2", "d_r"};
    for (int k = 1; k <= 8; ++k) header.push_back("lambda_" + std::to_string(k));
    header.push_back("n_s");
    CsvWriter w(path, header);
    for (const auto& it : record.iterations) {
        std::vector<std::string> row{std::to_string(it.iteration), format_number(it.pf), format_number(it.eps1),
                                     format_number(it.eps2), std::to_string(it.d_r)};
        for (Index k = 0; k < 8; ++k) row.push_back(k < it.eigenvalues.size() ? format_number(it.eigenvalues(k)) : "");
        row.push_back(std::to_string(it.n_s));
        w.row(row);
    }
}

void write_features_csv(const std::filesystem::path& path, const learner::RunRecord& record, double y_f) {
    const Index d = record.projection.d_r;
    std::vector<std::string> header;
    for (Index k = 1; k <= d; ++k) header.push_back("psi_" + std::to_string(k));
    header.insert(header.end(), {"y_pred", "y_true", "label"});
    CsvWriter w(path, header);
    if (!record.model) return;
    auto emit = [&](const Eigen::MatrixXd& f, const Eigen::VectorXd& pred, const Eigen::VectorXd* truth) {
        for (Index i = 0; i < f.rows(); ++i) {
            std::vector<std::string> row;
            for (Index k = 0; k < d; ++k) row.push_back(format_number(f(i, k)));
            row.push_back(format_number(pred(i)));
            const double decide = truth ? (*truth)(i) : pred(i);
            row.push_back(truth ? format_number((*truth)(i)) : "");
            row.push_back(decide >= y_f ? "failure" : "safe");
            w.row(row);
        }
    };
    Eigen::VectorXd pred;
    record.model->predict_batch(record.training.features, pred, nullptr, Exec::Serial);
    emit(record.training.features, pred, &record.training.y);
    emit(record.preview_features, record.preview_mean, nullptr);
}

void write_spectrum_csv(const std::filesystem::path& path, const learner::RunRecord& record) {
    CsvWriter w(path, {"iteration", "index", "eigenvalue"});
    for (const auto& it : record.iterations) {
        for (Index k = 0; k < it.eigenvalues.size(); ++k) {
            w.row({std::to_string(it.iteration), std::to_string(k + 1), format_number(it.eigenvalues(k))});
        }
    }
}

void write_trials_csv(const std::filesystem::path& path, const learner::RunRecord& record) {
    CsvWriter w(path, {"iteration", "d_r", "eps_d", "threshold", "accepted"});
    for (const auto& it : record.iterations) {
        for (const auto& t : it.trials) {
            w.row({std::to_string(it.iteration), std::to_string(t.d_r), format_number(t.eps_d),
                   format_number(it.eps_d_threshold), t.eps_d <= it.eps_d_threshold ? "1" : "0"});
        }
    }
}

double relative_error(double pf, double reference_pf) {
    if (!(reference_pf > 0.0)) throw Error("reference failure probability must be > 0");
    return std::abs(pf - reference_pf) / reference_pf;
}

std::vector<ComparisonRow> compare(const std::vector<json>& reports, const std::vector<std::string>& sources,
                                   const json& reference) {
    const double ref_pf = reference.at("result").at("pf").get<double>();
    std::vector<ComparisonRow> rows;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const json& r = reports[i];
        ComparisonRow row;
        const std::string kind = r.at("kind");
        if (kind == "mcs") {
            row.method = "MCS";
        } else if (kind == "form") {
            row.method = "FORM";
        } else {
            row.method = r.at("aashgp").at("mode") == "global_doe" ? "AaS-hGP (global DoE)" : "AaS-hGP";
        }
        row.source = i < sources.size() ? sources[i] : "";
        const json& res = r.at("result");
        row.pf = res.at("pf").get<double>();
        if (!res.at("n_s").is_null()) row.n_s = res.at("n_s").get<long long>();
        if (!res.at("n_g").is_null()) row.n_g = res.at("n_g").get<long long>();
        row.beta_g = learner::generalized_beta(row.pf);
        row.eps_p = 100.0 * relative_error(row.pf, ref_pf);
        rows.push_back(row);
    }
    return rows;
}

void write_comparison_csv(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows) {
    CsvWriter w(path, {"method", "source", "pf", "n_s", "n_g", "beta_g", "eps_p_percent"});
    for (const auto& r : rows) {
        w.row({r.method, r.source, format_number(r.pf), r.n_s ? std::to_string(*r.n_s) : "",
               r.n_g ? std::to_string(*r.n_g) : "", format_number(r.beta_g), format_number(r.eps_p)});
    }
}

std::string comparison_markdown(const std::vector<ComparisonRow>& rows) {
    std::ostringstream s;
    s << "| Method | Source | P_f | N_s | N_g | beta_g | eps_p (%) |\n";
    s << "|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        s << "| " << r.method << " | " << r.source << " | " << std::scientific << std::setprecision(3) << r.pf
          << " | " << (r.n_s ? std::to_string(*r.n_s) : "-") << " | " << (r.n_g ? std::to_string(*r.n_g) : "-")
          << " | " << std::fixed << std::setprecision(2) << r.beta_g << " | " << r.eps_p << " |\n";
    }
    return s.str();
}

}  // namespace aashgp::report
