#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aashgp/error.hpp"
#include "aashgp/hgp.hpp"
#include "aashgp/models.hpp"
#include "aashgp/parallel.hpp"
#include "aashgp/rv.hpp"
#include "aashgp/subspace.hpp"

namespace aashgp::learner {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Evaluated design points. `features` follows the current projection.
struct TrainingSet {
    MatrixXd x;
    VectorXd y;
    MatrixXd grad;
    MatrixXd features;

    Index size() const { return y.size(); }
    void append(const VectorXd& xi, const models::ModelEval& e);
};

enum class Mode { Adaptive, GlobalDoe };

struct LearnerConfig {
    Index n0 = 50;
    Index pool_size = 1'000'000;     // surrogate MCS pool
    Index working_pool_size = 10'000;  // candidates screened per iteration
    double eps_c = 2.0;
    double eps1_tol = 1e-3;
    double eps2_tol = 1e-3;
    std::optional<double> eps_d;     // absolute; default eps_d_fraction * std(y)
    double eps_d_fraction = 0.05;
    Index d_max = 0;                 // 0: min(D, 10)
    int max_iterations = 300;
    std::uint64_t seed = 0;
    Mode mode = Mode::Adaptive;
    bool warm_start = true;
    gp::HgpFitOptions fit;
    Exec exec = Exec::Parallel;
    std::size_t pool_cache_bytes = std::size_t{1} << 30;

    /// Throws ConfigError naming the violated constraint.
    void validate(Index dimension) const;
    Index effective_d_max(Index dimension) const;
};

/// Indices k with |y_f - mean_k| / sd_k <= eps_c, sd floored at kSigmaFloor.
inline constexpr double kSigmaFloor = 1e-12;
std::vector<Index> critical_set(const VectorXd& mean, const VectorXd& variance, double y_f, double eps_c);

struct Selection {
    Index index = -1;          // row of the candidate pool
    bool fallback = false;     // true when the critical set was empty
    double min_distance = 0.0; // to the nearest training feature
};

/// Max-min distance acquisition over the critical candidates; ties go to
/// the lowest index. With no critical candidates, picks the candidate
/// minimizing |y_f - mean| / sd.
Selection select_next(const std::vector<Index>& critical, const MatrixXd& candidates,
                      const MatrixXd& training, const VectorXd& mean, const VectorXd& variance,
                      double y_f, Exec exec = Exec::Parallel);

/// Fraction of rows whose predicted mean is at least y_f.
double estimate_pf(const MatrixXd& features, const gp::HgpModel& model, double y_f,
                   Exec exec = Exec::Parallel);
/// Same estimate over a streamed pool projected by w_r.
double estimate_pf(const rv::SamplePool& pool, const MatrixXd& w_r, const gp::HgpModel& model,
                   double y_f, Exec exec = Exec::Parallel);

struct ConvergenceStatus {
    double eps1 = std::numeric_limits<double>::quiet_NaN();
    double eps2 = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
};

/// Relative change of the last estimate (eps1) and change of eps1 (eps2).
/// eps1 is +inf when the last estimate is 0.
ConvergenceStatus check_convergence(const std::vector<double>& history, double eps1_tol, double eps2_tol);

struct IterationRecord {
    int iteration = 0;
    double pf = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    Index d_r = 0;
    bool d_converged = false;
    double eps_d_threshold = 0.0;
    std::vector<subspace::DimensionTrial> trials;
    VectorXd eigenvalues;
    double spectral_gap = 0.0;
    double bound = 0.0;
    Index n_s = 0;
    Index critical_size = 0;
    Index selected_index = -1;
    bool fallback = false;
    double seconds = 0.0;
};

enum class Status { Converged, BudgetExhausted, Completed, Failed };
const char* to_string(Status s);
int exit_code(Status s);

struct RunRecord {
    std::vector<IterationRecord> iterations;
    Status status = Status::Failed;
    std::string message;
    Index n_s = 0;
    Index n_g = 0;
    double pf = 0.0;
    double beta_g = 0.0;
    TrainingSet training;
    subspace::SubspaceProjection projection;
    std::optional<gp::HgpModel> model;
    MatrixXd preview_features;  // leading rows of the surrogate MCS pool
    VectorXd preview_mean;
};

/// Thrown when a stage fails; carries everything recorded up to that point.
class RunAborted : public Error {
public:
    RunAborted(const std::string& what, RunRecord partial)
        : Error(what), record(std::move(partial)) {}
    RunRecord record;
};

using IterationCallback = std::function<void(const IterationRecord&)>;

/// Adaptive active-subspace learning loop for P[M(X) >= y_f].
RunRecord run(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f,
              const LearnerConfig& config, const IterationCallback& on_iteration = {});

/// Generalized reliability index -Phi^-1(pf); +/-inf at pf = 0 or 1.
double generalized_beta(double pf);

}  // namespace aashgp::learner
