#include "aashgp/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "aashgp/error.hpp"
#include "aashgp/truss.hpp"

namespace aashgp::config {

using nlohmann::json;

std::map<std::string, int> locate_keys(const std::string& text) {
    struct Frame {
        bool object;
        std::string key;
        long index = 0;
        bool expect_key = true;
    };
    std::map<std::string, int> lines;
    std::vector<Frame> stack;
    std::vector<std::string> paths{""};
    int line = 1;

    auto value_path = [&]() -> std::string {
        if (stack.empty()) return "";
        const Frame& f = stack.back();
        return paths.back() + "/" + (f.object ? f.key : std::to_string(f.index));
    };
    auto at_value = [&]() {
        const std::string p = value_path();
        lines.emplace(p, line);
        return p;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
        } else if (c == '"') {
            const int start_line = line;
            std::string s;
            for (++i; i < text.size() && text[i] != '"'; ++i) {
                if (text[i] == '\\' && i + 1 < text.size()) {
                    s += text[++i];
                } else {
                    if (text[i] == '\n') ++line;
                    s += text[i];
                }
            }
            if (!stack.empty() && stack.back().object && stack.back().expect_key) {
                stack.back().key = s;
                stack.back().expect_key = false;
                lines.emplace(value_path(), start_line);
            } else {
                at_value();
            }
        } else if (c == '{' || c == '[') {
            const std::string p = at_value();
            paths.push_back(p);
            stack.push_back({c == '{', "", 0, true});
        } else if (c == '}' || c == ']') {
            if (!stack.empty()) {
                stack.pop_back();
                paths.pop_back();
            }
        } else if (c == ',') {
            if (!stack.empty()) {
                if (stack.back().object) {
                    stack.back().expect_key = true;
                } else {
                    ++stack.back().index;
                }
            }
        } else if (c == '-' || c == 't' || c == 'f' || c == 'n' || (c >= '0' && c <= '9')) {
            at_value();
            while (i + 1 < text.size() && std::string_view(",]} \t\r\n").find(text[i + 1]) == std::string_view::npos) ++i;
        }
    }
    return lines;
}

namespace {

std::string dotted(const std::string& pointer) {
    std::string s = pointer.substr(pointer.empty() ? 0 : 1);
    for (char& c : s)
        if (c == '/') c = '.';
    return s.empty() ? "<root>" : s;
}

class Schema {
public:
    Schema(std::string name, std::map<std::string, int> lines)
        : name_(std::move(name)), lines_(std::move(lines)) {}

    [[noreturn]] void fail(const std::string& pointer, const std::string& message) const {
        throw ConfigError(name_ + ":" + std::to_string(line_of(pointer)) + ": " + message);
    }

    int line_of(std::string pointer) const {
        for (;;) {
            if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
            const auto slash = pointer.rfind('/');
            if (slash == std::string::npos || pointer.empty()) return 1;
            pointer.erase(slash);
        }
    }

    void allow(const json& obj, const std::string& pointer, std::initializer_list<std::string_view> keys) const {
        if (!obj.is_object()) fail(pointer, dotted(pointer) + " must be an object");
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool ok = false;
            for (auto k : keys) ok = ok || it.key() == k;
            if (!ok) fail(pointer + "/" + it.key(), "unknown key '" + it.key() + "' in " + dotted(pointer));
        }
    }

    const json* find(const json& obj, const std::string& key) const {
        auto it = obj.find(key);
        return it == obj.end() ? nullptr : &*it;
    }

    const json& require(const json& obj, const std::string& pointer, const std::string& key) const {
        const json* v = find(obj, key);
        if (!v) fail(pointer, "missing required key " + dotted(pointer + "/" + key));
        return *v;
    }

    double number(const json& v, const std::string& pointer) const {
        if (!v.is_number()) fail(pointer, dotted(pointer) + " must be a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) fail(pointer, dotted(pointer) + " must be finite");
        return d;
    }

    double positive(const json& v, const std::string& pointer) const {
        const double d = number(v, pointer);
        if (!(d > 0.0)) fail(pointer, dotted(pointer) + " must be > 0");
        return d;
    }

    long long integer(const json& v, const std::string& pointer, long long min) const {
        if (!v.is_number()) fail(pointer, dotted(pointer) + " must be an integer");
        const double d = v.get<double>();
        if (v.is_number_float() && (d != std::floor(d) || std::abs(d) > 9e15)) {
            fail(pointer, dotted(pointer) + " must be an integer");
        }
        const long long i = v.is_number_unsigned() ? static_cast<long long>(v.get<std::uint64_t>())
                            : v.is_number_integer() ? v.get<long long>()
                                                    : static_cast<long long>(d);
        if (i < min) fail(pointer, dotted(pointer) + " must be >= " + std::to_string(min));
        return i;
    }

    std::uint64_t seed(const json& v, const std::string& pointer) const {
        if (v.is_number_unsigned()) return v.get<std::uint64_t>();
        return static_cast<std::uint64_t>(integer(v, pointer, 0));
    }

    bool boolean(const json& v, const std::string& pointer) const {
        if (!v.is_boolean()) fail(pointer, dotted(pointer) + " must be true or false");
        return v.get<bool>();
    }

    std::string string(const json& v, const std::string& pointer) const {
        if (!v.is_string()) fail(pointer, dotted(pointer) + " must be a string");
        return v.get<std::string>();
    }

private:
    std::string name_;
    std::map<std::string, int> lines_;
};

void parse_model(const Schema& s, const json& m, ModelConfig& out) {
    const std::string p = "/model";
    s.allow(m, p, {"name", "dimension", "threshold", "negate", "parameters", "gradient"});
    out.name = s.string(s.require(m, p, "name"), p + "/name");
    if (out.name != "product" && out.name != "linear" && out.name != "truss25") {
        s.fail(p + "/name", "model.name must be one of product, linear, truss25 (got '" + out.name + "')");
    }
    if (const json* d = s.find(m, "dimension")) {
        out.dimension = s.integer(*d, p + "/dimension", 1);
    } else if (out.name != "truss25") {
        s.fail(p, "missing required key model.dimension");
    }
    out.threshold = s.number(s.require(m, p, "threshold"), p + "/threshold");
    if (const json* v = s.find(m, "negate")) out.negate = s.boolean(*v, p + "/negate");

    const json empty = json::object();
    const json* params = s.find(m, "parameters");
    const json& q = params ? *params : empty;
    const std::string pp = p + "/parameters";
    if (out.name == "product") {
        s.allow(q, pp, {"lambdas", "n_active", "lambda_active", "lambda_inactive"});
        if (const json* l = s.find(q, "lambdas")) {
            if (!l->is_array()) s.fail(pp + "/lambdas", "model.parameters.lambdas must be an array");
            Eigen::VectorXd v(static_cast<Index>(l->size()));
            for (std::size_t i = 0; i < l->size(); ++i) {
                v(static_cast<Index>(i)) = s.number((*l)[i], pp + "/lambdas/" + std::to_string(i));
                if (v(static_cast<Index>(i)) < 0.0) s.fail(pp + "/lambdas/" + std::to_string(i), "lambda values must be >= 0");
            }
            if (v.size() != out.dimension) s.fail(pp + "/lambdas", "model.parameters.lambdas must have model.dimension entries");
            out.lambdas = v;
        }
        if (const json* v = s.find(q, "n_active")) out.n_active = s.integer(*v, pp + "/n_active", 0);
        if (out.n_active > out.dimension) s.fail(pp + "/n_active", "model.parameters.n_active must not exceed model.dimension");
        if (const json* v = s.find(q, "lambda_active")) out.lambda_active = s.number(*v, pp + "/lambda_active");
        if (const json* v = s.find(q, "lambda_inactive")) out.lambda_inactive = s.number(*v, pp + "/lambda_inactive");
        if (out.lambda_active < 0.0 || out.lambda_inactive < 0.0) s.fail(pp, "lambda values must be >= 0");
    } else if (out.name == "linear") {
        s.allow(q, pp, {"beta0"});
        if (const json* v = s.find(q, "beta0")) out.beta0 = s.number(*v, pp + "/beta0");
    } else {
        s.allow(q, pp, {"geometry"});
        out.geometry = s.string(s.require(q, pp, "geometry"), pp + "/geometry");
        if (out.dimension == 0) out.dimension = 57;
    }

    if (const json* g = s.find(m, "gradient")) {
        const std::string gp = p + "/gradient";
        s.allow(*g, gp, {"mode", "step"});
        models::GradientSpec spec;
        const std::string mode = s.string(s.require(*g, gp, "mode"), gp + "/mode");
        if (mode == "analytic") {
            spec.mode = models::GradientMode::Analytic;
        } else if (mode == "central_difference") {
            spec.mode = models::GradientMode::CentralDifference;
        } else {
            s.fail(gp + "/mode", "model.gradient.mode must be analytic or central_difference");
        }
        if (const json* v = s.find(*g, "step")) spec.step = s.positive(*v, gp + "/step");
        out.gradient = spec;
    }
}

rv::MarginalSpec parse_marginal(const Schema& s, const json& m, const std::string& p) {
    const std::string kind = s.string(s.require(m, p, "kind"), p + "/kind");
    auto get = [&](const char* key) { return s.number(s.require(m, p, key), p + "/" + key); };
    rv::MarginalSpec spec;
    try {
        if (kind == "gaussian") {
            s.allow(m, p, {"kind", "count", "mean", "std"});
            spec = rv::MarginalSpec::gaussian(get("mean"), get("std"));
        } else if (kind == "lognormal") {
            if (s.find(m, "mean") || s.find(m, "cov")) {
                s.allow(m, p, {"kind", "count", "mean", "cov"});
                spec = rv::lognormal_from_mean_cov(get("mean"), get("cov"));
            } else {
                s.allow(m, p, {"kind", "count", "location", "scale"});
                spec = rv::MarginalSpec::lognormal(get("location"), get("scale"));
            }
        } else if (kind == "uniform") {
            s.allow(m, p, {"kind", "count", "lower", "upper"});
            spec = rv::MarginalSpec::uniform(get("lower"), get("upper"));
        } else {
            s.fail(p + "/kind", "marginal kind must be gaussian, lognormal or uniform (got '" + kind + "')");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        s.fail(p, e.what());
    }
    return spec;
}

void parse_rv(const Schema& s, const json& r, Index dimension, RunConfig& out) {
    const std::string p = "/rv";
    s.allow(r, p, {"preset", "marginals"});
    const json* preset = s.find(r, "preset");
    const json* marginals = s.find(r, "marginals");
    if ((preset != nullptr) == (marginals != nullptr)) s.fail(p, "rv needs exactly one of preset or marginals");
    if (preset) {
        const std::string name = s.string(*preset, p + "/preset");
        if (name == "unit_uniform") {
            out.rv = rv::RandomVectorSpec::iid(rv::MarginalSpec::uniform(0.0, 1.0), dimension);
        } else if (name == "standard_normal") {
            out.rv = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0.0, 1.0), dimension);
        } else if (name == "truss25") {
            out.rv = truss25_spec();
        } else {
            s.fail(p + "/preset", "rv.preset must be unit_uniform, standard_normal or truss25 (got '" + name + "')");
        }
        out.rv_description = name;
    } else {
        if (!marginals->is_array() || marginals->empty()) s.fail(p + "/marginals", "rv.marginals must be a non-empty array");
        for (std::size_t i = 0; i < marginals->size(); ++i) {
            const std::string mp = p + "/marginals/" + std::to_string(i);
            const json& m = (*marginals)[i];
            if (!m.is_object()) s.fail(mp, dotted(mp) + " must be an object");
            const rv::MarginalSpec spec = parse_marginal(s, m, mp);
            long long count = 1;
            if (const json* c = s.find(m, "count")) count = s.integer(*c, mp + "/count", 1);
            for (long long k = 0; k < count; ++k) out.rv.marginals.push_back(spec);
        }
        out.rv_description = "marginals";
    }
    if (out.rv.dimension() != dimension) {
        s.fail(p, "rv dimension " + std::to_string(out.rv.dimension()) + " does not match model.dimension " +
                      std::to_string(dimension));
    }
}

void parse_learner(const Schema& s, const json& l, Index dimension, learner::LearnerConfig& c) {
    const std::string p = "/learner";
    s.allow(l, p, {"n0", "N", "working_pool", "eps_c", "eps1_tol", "eps2_tol", "eps_d", "eps_d_fraction", "d_max",
                   "max_iterations", "seed", "mode", "warm_start", "restarts", "pool_cache_mb"});
    if (const json* v = s.find(l, "n0")) c.n0 = s.integer(*v, p + "/n0", 3);
    if (const json* v = s.find(l, "N")) c.pool_size = s.integer(*v, p + "/N", 1);
    if (const json* v = s.find(l, "working_pool")) c.working_pool_size = s.integer(*v, p + "/working_pool", 1);
    if (const json* v = s.find(l, "eps_c")) c.eps_c = s.positive(*v, p + "/eps_c");
    if (const json* v = s.find(l, "eps1_tol")) c.eps1_tol = s.positive(*v, p + "/eps1_tol");
    if (const json* v = s.find(l, "eps2_tol")) c.eps2_tol = s.positive(*v, p + "/eps2_tol");
    if (const json* v = s.find(l, "eps_d"); v && !v->is_null()) c.eps_d = s.positive(*v, p + "/eps_d");
    if (const json* v = s.find(l, "eps_d_fraction")) c.eps_d_fraction = s.positive(*v, p + "/eps_d_fraction");
    if (const json* v = s.find(l, "d_max")) {
        c.d_max = s.integer(*v, p + "/d_max", 1);
        if (c.d_max > dimension) s.fail(p + "/d_max", "learner.d_max must not exceed model.dimension");
    }
    if (const json* v = s.find(l, "max_iterations")) c.max_iterations = static_cast<int>(s.integer(*v, p + "/max_iterations", 0));
    if (const json* v = s.find(l, "seed")) c.seed = s.seed(*v, p + "/seed");
    if (const json* v = s.find(l, "mode")) {
        const std::string mode = s.string(*v, p + "/mode");
        if (mode == "adaptive") {
            c.mode = learner::Mode::Adaptive;
        } else if (mode == "global_doe") {
            c.mode = learner::Mode::GlobalDoe;
        } else {
            s.fail(p + "/mode", "learner.mode must be adaptive or global_doe");
        }
    }
    if (const json* v = s.find(l, "warm_start")) c.warm_start = s.boolean(*v, p + "/warm_start");
    if (const json* v = s.find(l, "restarts")) c.fit.restarts = static_cast<int>(s.integer(*v, p + "/restarts", 1));
    if (const json* v = s.find(l, "pool_cache_mb")) {
        c.pool_cache_bytes = static_cast<std::size_t>(s.integer(*v, p + "/pool_cache_mb", 0)) << 20;
    }
    if (c.n0 * 100 > c.pool_size) {
        s.fail(s.find(l, "n0") ? p + "/n0" : p, "learner.n0 = " + std::to_string(c.n0) + " violates n0 <= N/100 (N = " +
                                                     std::to_string(c.pool_size) + ")");
    }
    try {
        c.validate(dimension);
    } catch (const ConfigError& e) {
        s.fail(p, e.what());
    }
}

void parse_baselines(const Schema& s, const json& b, BaselineConfig& c) {
    const std::string p = "/baselines";
    s.allow(b, p, {"mcs_n", "mcs_seed", "form", "form_max_iterations", "form_tolerance"});
    if (const json* v = s.find(b, "mcs_n")) c.mcs_n = s.integer(*v, p + "/mcs_n", 1);
    if (const json* v = s.find(b, "mcs_seed")) c.mcs_seed = s.seed(*v, p + "/mcs_seed");
    if (const json* v = s.find(b, "form")) c.form = s.boolean(*v, p + "/form");
    if (const json* v = s.find(b, "form_max_iterations")) {
        c.form_max_iterations = static_cast<int>(s.integer(*v, p + "/form_max_iterations", 1));
    }
    if (const json* v = s.find(b, "form_tolerance")) c.form_tolerance = s.positive(*v, p + "/form_tolerance");
}

void parse_output(const Schema& s, const json& o, OutputConfig& c) {
    const std::string p = "/output";
    s.allow(o, p, {"directory", "formats"});
    if (const json* v = s.find(o, "directory")) c.directory = s.string(*v, p + "/directory");
    if (const json* v = s.find(o, "formats")) {
        if (!v->is_array()) s.fail(p + "/formats", "output.formats must be an array");
        c.json = c.csv = false;
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string f = s.string((*v)[i], p + "/formats/" + std::to_string(i));
            if (f == "json") {
                c.json = true;
            } else if (f == "csv") {
                c.csv = true;
            } else {
                s.fail(p + "/formats/" + std::to_string(i), "output.formats entries must be json or csv");
            }
        }
    }
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& name, const std::filesystem::path& base_dir) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        // Byte offset -> line for the message.
        const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
        const long line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw ConfigError(name + ":" + std::to_string(line) + ": invalid JSON: " + e.what());
    }
    const Schema s(name, locate_keys(text));
    s.allow(doc, "", {"model", "rv", "learner", "baselines", "output"});

    RunConfig c;
    c.base_dir = base_dir;
    parse_model(s, s.require(doc, "", "model"), c.model);
    parse_rv(s, s.require(doc, "", "rv"), c.model.dimension, c);
    if (const json* v = s.find(doc, "learner")) {
        parse_learner(s, *v, c.model.dimension, c.learner);
    } else {
        try {
            c.learner.validate(c.model.dimension);
        } catch (const ConfigError& e) {
            s.fail("", e.what());
        }
    }
    if (const json* v = s.find(doc, "baselines")) parse_baselines(s, *v, c.baselines);
    if (const json* v = s.find(doc, "output")) parse_output(s, *v, c.output);
    c.document = std::move(doc);
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string(), path.parent_path().empty() ? "." : path.parent_path());
}

void override_seed(RunConfig& config, std::uint64_t seed) {
    config.learner.seed = seed;
    config.baselines.mcs_seed.reset();
    config.document["learner"]["seed"] = seed;
    if (config.document.contains("baselines")) config.document["baselines"].erase("mcs_seed");
}

std::shared_ptr<const models::Model> build_model(const RunConfig& config) {
    const ModelConfig& m = config.model;
    std::shared_ptr<models::Model> base;
    if (m.name == "product") {
        base = std::make_shared<models::ProductModel>(
            m.lambdas ? models::ProductModel(*m.lambdas)
                      : models::ProductModel::with_effective_dimension(m.dimension, m.n_active, m.lambda_active,
                                                                       m.lambda_inactive));
    } else if (m.name == "linear") {
        base = std::make_shared<models::LinearModel>(m.dimension, m.beta0);
    } else if (m.name == "truss25") {
        const auto path = m.geometry.is_absolute() ? m.geometry : config.base_dir / m.geometry;
        auto truss = std::make_shared<models::TrussModel>(models::load_truss_geometry(path));
        if (truss->dimension() != m.dimension) {
            throw ConfigError("truss geometry has " + std::to_string(truss->dimension()) +
                              " inputs but model.dimension is " + std::to_string(m.dimension));
        }
        base = truss;
    } else {
        throw ConfigError("unknown model " + m.name);
    }
    if (m.gradient) base->set_gradient_spec(*m.gradient);
    if (m.negate) return std::make_shared<models::NegatedModel>(base);
    return base;
}

rv::RandomVectorSpec truss25_spec() {
    rv::RandomVectorSpec spec;
    auto add = [&](int count, const rv::MarginalSpec& m) {
        for (int i = 0; i < count; ++i) spec.marginals.push_back(m);
    };
    add(1, rv::lognormal_from_mean_cov(1000.0, 0.1));
    add(4, rv::lognormal_from_mean_cov(10000.0, 0.05));
    add(1, rv::lognormal_from_mean_cov(600.0, 0.1));
    add(1, rv::lognormal_from_mean_cov(500.0, 0.1));
    add(25, rv::lognormal_from_mean_cov(1e7, 0.05));
    const std::pair<int, double> areas[] = {{1, 0.4}, {4, 0.1}, {4, 3.4}, {2, 0.4},
                                            {2, 1.3}, {4, 0.9}, {4, 1.0}, {4, 3.4}};
    for (const auto& [count, mean] : areas) add(count, rv::MarginalSpec::gaussian(mean, 0.1 * mean));
    return spec;
}

}  // namespace aashgp::config
