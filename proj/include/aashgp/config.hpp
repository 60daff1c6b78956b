#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aashgp/learner.hpp"
#include "aashgp/models.hpp"
#include "aashgp/rv.hpp"

namespace aashgp::config {

using Eigen::Index;

struct ModelConfig {
    std::string name;     // product | linear | truss25
    Index dimension = 0;
    double threshold = 0.0;
    bool negate = false;  // use -M(x), i.e. the lower-tail event M(x) <= -threshold

    // product
    std::optional<Eigen::VectorXd> lambdas;
    Index n_active = 4;
    double lambda_active = 1.0;
    double lambda_inactive = 500.0;
    // linear
    double beta0 = 3.0;
    // truss25
    std::filesystem::path geometry;

    std::optional<models::GradientSpec> gradient;  // model default when unset
};

struct BaselineConfig {
    Index mcs_n = 1'000'000;
    std::optional<std::uint64_t> mcs_seed;  // defaults to learner.seed
    bool form = true;
    int form_max_iterations = 100;
    double form_tolerance = 1e-6;
};

struct OutputConfig {
    std::filesystem::path directory = "out";
    bool json = true;
    bool csv = true;
};

struct RunConfig {
    ModelConfig model;
    rv::RandomVectorSpec rv;
    std::string rv_description;
    learner::LearnerConfig learner;
    BaselineConfig baselines;
    OutputConfig output;
    nlohmann::json document;      // validated input, for archival in reports
    std::filesystem::path base_dir;  // relative paths resolve against this

    std::uint64_t mcs_seed() const { return baselines.mcs_seed.value_or(learner.seed); }
};

/// Maps JSON pointers ("/learner/n0") to 1-based source lines.
std::map<std::string, int> locate_keys(const std::string& text);

/// Parses and validates a configuration. Errors are ConfigError with a
/// "name:line: message" prefix.
RunConfig parse_config(const std::string& text, const std::string& name = "<config>",
                       const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

/// Applies a seed override to the learner and MCS streams.
void override_seed(RunConfig& config, std::uint64_t seed);

std::shared_ptr<const models::Model> build_model(const RunConfig& config);

/// Marginals of the 57 truss inputs [P1..P7, E1..E25, A1..A25] (psi, in^2, lbf).
rv::RandomVectorSpec truss25_spec();

}  // namespace aashgp::config
