#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "aashgp/parallel.hpp"
#include "aashgp/rng.hpp"

namespace aashgp::rv {

using Eigen::Index;

double normal_pdf(double u);
double normal_cdf(double u);
/// Inverse standard normal CDF (Wichura's AS241, ~1e-16 relative).
/// Throws DomainError unless 0 < p < 1.
double normal_quantile(double p);

enum class Kind { Gaussian, Lognormal, Uniform };

const char* to_string(Kind kind);

/// One independent marginal. Parameters are in natural units of X:
/// Gaussian (mean, std), Lognormal (location and scale of ln X),
/// Uniform (lower, upper).
struct MarginalSpec {
    Kind kind = Kind::Gaussian;
    double p1 = 0.0;
    double p2 = 1.0;

    static MarginalSpec gaussian(double mean, double stddev);
    static MarginalSpec lognormal(double location, double scale);
    static MarginalSpec uniform(double lower, double upper);

    void validate() const;
    bool in_support(double x) const;
    double cdf(double x) const;
    double quantile(double p) const;
    double mean() const;
    double stddev() const;
    double median() const;
};

/// Lognormal marginal with the requested mean and coefficient of variation.
MarginalSpec lognormal_from_mean_cov(double mean, double cov);

struct RandomVectorSpec {
    std::vector<MarginalSpec> marginals;

    Index dimension() const { return static_cast<Index>(marginals.size()); }
    void validate() const;

    static RandomVectorSpec iid(const MarginalSpec& marginal, Index dimension);
};

/// Rows are realizations of X in natural units.
using SampleMatrix = Eigen::MatrixXd;

/// Samples are generated in blocks of this many rows; block b always uses
/// sub-stream b, so results do not depend on thread count.
inline constexpr Index kBlockRows = 10000;

SampleMatrix sample(const RandomVectorSpec& spec, Index n, const rng::StreamKey& key,
                    Exec exec = Exec::Parallel);
SampleMatrix sample(const RandomVectorSpec& spec, Index n, std::uint64_t seed);

/// Writes rows [b*kBlockRows, min(n, (b+1)*kBlockRows)) of the sample
/// defined by (spec, n, key) into `out` (resized as needed).
void sample_block(const RandomVectorSpec& spec, Index n, const rng::StreamKey& key, Index block,
                  Eigen::MatrixXd& out);

Eigen::VectorXd to_standard(const RandomVectorSpec& spec, const Eigen::VectorXd& x);
Eigen::VectorXd from_standard(const RandomVectorSpec& spec, const Eigen::VectorXd& u);
/// Diagonal of dx/du at u (the transform is separable).
Eigen::VectorXd from_standard_jacobian(const RandomVectorSpec& spec, const Eigen::VectorXd& u);

/// A fixed sample of size n that can be streamed block by block. Small pools
/// are materialized once; pools larger than `cache_limit_bytes` are
/// regenerated on demand from their stream key, bit-identically.
class SamplePool {
public:
    using BlockRef = Eigen::Ref<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;

    SamplePool(RandomVectorSpec spec, Index n, rng::StreamKey key,
               std::size_t cache_limit_bytes = std::size_t{1} << 30);

    Index size() const { return n_; }
    Index dimension() const { return spec_.dimension(); }
    Index block_count() const { return (n_ + kBlockRows - 1) / kBlockRows; }
    bool cached() const { return cache_.size() > 0; }

    /// Rows of block b. `workspace` is used only when the pool is not cached.
    BlockRef block(Index b, Eigen::MatrixXd& workspace) const;

private:
    RandomVectorSpec spec_;
    Index n_;
    rng::StreamKey key_;
    Eigen::MatrixXd cache_;
};

}  // namespace aashgp::rv
