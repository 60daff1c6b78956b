#include "aashgp/rv.hpp"

#include <cmath>
#include <sstream>

#include "aashgp/error.hpp"

namespace aashgp::rv {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double poly(const double* c, int n, double r) {
    double v = c[n - 1];
    for (int i = n - 2; i >= 0; --i) v = v * r + c[i];
    return v;
}

// AS241 (PPND16) coefficients, lowest order first.
constexpr double kA[8] = {3.3871328727963666080e0, 1.3314166789178437745e+2,
                          1.9715909503065514427e+3, 1.3731693765509461125e+4,
                          4.5921953931549871457e+4, 6.7265770927008700853e+4,
                          3.3430575583588128105e+4, 2.5090809287301226727e+3};
constexpr double kB[8] = {1.0,
                          4.2313330701600911252e+1,
                          6.8718700749205790830e+2,
                          5.3941960214247511077e+3,
                          2.1213794301586595867e+4,
                          3.9307895800092710610e+4,
                          2.8729085735721942674e+4,
                          5.2264952788528545610e+3};
constexpr double kC[8] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                          5.76949722146069140550e0,  3.64784832476320460504e0,
                          1.27045825245236838258e0,  2.41780725177450611770e-1,
                          2.27238449892691845833e-2, 7.74545014278341407640e-4};
constexpr double kD[8] = {1.0,
                          2.05319162663775882187e0,
                          1.67638483018380384940e0,
                          6.89767334985100004550e-1,
                          1.48103976427480074590e-1,
                          1.51986665636164571966e-2,
                          5.47593808499534494600e-4,
                          1.05075007164441684324e-9};
constexpr double kE[8] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                          1.78482653991729133580e0,  2.96560571828504891230e-1,
                          2.65321895265761230930e-2, 1.24266094738807843860e-3,
                          2.71155556874348757815e-5, 2.01033439929228813265e-7};
constexpr double kF[8] = {1.0,
                          5.99832206555887937690e-1,
                          1.36929880922735805310e-1,
                          1.48753612908506148525e-2,
                          7.86869131145613259100e-4,
                          1.84631831751005468180e-5,
                          1.42151175831644588870e-7,
                          2.04426310338993978564e-15};

void fill_rows(const RandomVectorSpec& spec, std::mt19937_64& engine, Index first, Index count,
               Eigen::MatrixXd& out) {
    const Index dim = spec.dimension();
    for (Index r = 0; r < count; ++r) {
        for (Index j = 0; j < dim; ++j) {
            out(first + r, j) = spec.marginals[static_cast<std::size_t>(j)].quantile(
                rng::uniform_open(engine));
        }
    }
}

}  // namespace

double normal_pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

double normal_cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        std::ostringstream msg;
        msg << "normal_quantile: probability " << p << " outside (0, 1)";
        throw DomainError(msg.str());
    }
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * poly(kA, 8, r) / poly(kB, 8, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double value;
    if (r <= 5.0) {
        r -= 1.6;
        value = poly(kC, 8, r) / poly(kD, 8, r);
    } else {
        r -= 5.0;
        value = poly(kE, 8, r) / poly(kF, 8, r);
    }
    return q < 0.0 ? -value : value;
}

const char* to_string(Kind kind) {
    switch (kind) {
        case Kind::Gaussian: return "gaussian";
        case Kind::Lognormal: return "lognormal";
        case Kind::Uniform: return "uniform";
    }
    return "?";
}

MarginalSpec MarginalSpec::gaussian(double mean, double stddev) {
    MarginalSpec m{Kind::Gaussian, mean, stddev};
    m.validate();
    return m;
}

MarginalSpec MarginalSpec::lognormal(double location, double scale) {
    MarginalSpec m{Kind::Lognormal, location, scale};
    m.validate();
    return m;
}

MarginalSpec MarginalSpec::uniform(double lower, double upper) {
    MarginalSpec m{Kind::Uniform, lower, upper};
    m.validate();
    return m;
}

void MarginalSpec::validate() const {
    if (!std::isfinite(p1) || !std::isfinite(p2)) {
        throw InvalidParameter("marginal parameters must be finite");
    }
    switch (kind) {
        case Kind::Gaussian:
        case Kind::Lognormal:
            if (!(p2 > 0.0)) {
                throw InvalidParameter(std::string(to_string(kind)) + " marginal needs scale > 0");
            }
            break;
        case Kind::Uniform:
            if (!(p2 > p1)) throw InvalidParameter("uniform marginal needs upper > lower");
            break;
    }
}

bool MarginalSpec::in_support(double x) const {
    if (!std::isfinite(x)) return false;
    switch (kind) {
        case Kind::Gaussian: return true;
        case Kind::Lognormal: return x > 0.0;
        case Kind::Uniform: return x >= p1 && x <= p2;
    }
    return false;
}

double MarginalSpec::cdf(double x) const {
    switch (kind) {
        case Kind::Gaussian: return normal_cdf((x - p1) / p2);
        case Kind::Lognormal: return x <= 0.0 ? 0.0 : normal_cdf((std::log(x) - p1) / p2);
        case Kind::Uniform:
            if (x <= p1) return 0.0;
            if (x >= p2) return 1.0;
            return (x - p1) / (p2 - p1);
    }
    return 0.0;
}

double MarginalSpec::quantile(double p) const {
    switch (kind) {
        case Kind::Gaussian: return p1 + p2 * normal_quantile(p);
        case Kind::Lognormal: return std::exp(p1 + p2 * normal_quantile(p));
        case Kind::Uniform: return p1 + (p2 - p1) * p;
    }
    return 0.0;
}

double MarginalSpec::mean() const {
    switch (kind) {
        case Kind::Gaussian: return p1;
        case Kind::Lognormal: return std::exp(p1 + 0.5 * p2 * p2);
        case Kind::Uniform: return 0.5 * (p1 + p2);
    }
    return 0.0;
}

double MarginalSpec::stddev() const {
    switch (kind) {
        case Kind::Gaussian: return p2;
        case Kind::Lognormal: return mean() * std::sqrt(std::expm1(p2 * p2));
        case Kind::Uniform: return (p2 - p1) / std::sqrt(12.0);
    }
    return 0.0;
}

double MarginalSpec::median() const {
    switch (kind) {
        case Kind::Gaussian: return p1;
        case Kind::Lognormal: return std::exp(p1);
        case Kind::Uniform: return 0.5 * (p1 + p2);
    }
    return 0.0;
}

MarginalSpec lognormal_from_mean_cov(double mean, double cov) {
    if (!(mean > 0.0) || !(cov > 0.0) || !std::isfinite(mean) || !std::isfinite(cov)) {
        throw InvalidParameter("lognormal_from_mean_cov: mean and cov must be positive");
    }
    const double var_ln = std::log1p(cov * cov);
    const double scale = std::sqrt(var_ln);
    return MarginalSpec::lognormal(std::log(mean) - 0.5 * var_ln, scale);
}

void RandomVectorSpec::validate() const {
    if (marginals.empty()) throw InvalidParameter("random vector needs at least one marginal");
    for (const auto& m : marginals) m.validate();
}

RandomVectorSpec RandomVectorSpec::iid(const MarginalSpec& marginal, Index dimension) {
    if (dimension < 1) throw InvalidParameter("random vector dimension must be >= 1");
    marginal.validate();
    return RandomVectorSpec{std::vector<MarginalSpec>(static_cast<std::size_t>(dimension), marginal)};
}

void sample_block(const RandomVectorSpec& spec, Index n, const rng::StreamKey& key, Index block,
                  Eigen::MatrixXd& out) {
    const Index first = block * kBlockRows;
    const Index count = std::min(kBlockRows, n - first);
    if (count <= 0) throw InvalidParameter("sample_block: block index out of range");
    out.resize(count, spec.dimension());
    auto engine = rng::make_engine(key, static_cast<std::uint64_t>(block));
    fill_rows(spec, engine, 0, count, out);
}

SampleMatrix sample(const RandomVectorSpec& spec, Index n, const rng::StreamKey& key, Exec exec) {
    spec.validate();
    if (n < 1) throw InvalidParameter("sample: n must be >= 1");
    SampleMatrix x(n, spec.dimension());
    const Index blocks = (n + kBlockRows - 1) / kBlockRows;
    auto run_block = [&](Index b) {
        const Index first = b * kBlockRows;
        const Index count = std::min(kBlockRows, n - first);
        auto engine = rng::make_engine(key, static_cast<std::uint64_t>(b));
        fill_rows(spec, engine, first, count, x);
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
        for (Index b = 0; b < blocks; ++b) run_block(b);
    } else {
        for (Index b = 0; b < blocks; ++b) run_block(b);
    }
    return x;
}

SampleMatrix sample(const RandomVectorSpec& spec, Index n, std::uint64_t seed) {
    return sample(spec, n, rng::StreamKey{seed, rng::Purpose::Generic, 0});
}

Eigen::VectorXd to_standard(const RandomVectorSpec& spec, const Eigen::VectorXd& x) {
    if (x.size() != spec.dimension()) throw DimensionMismatch("to_standard: dimension mismatch");
    Eigen::VectorXd u(x.size());
    for (Index j = 0; j < x.size(); ++j) {
        const auto& m = spec.marginals[static_cast<std::size_t>(j)];
        const double xj = x(j);
        if (!m.in_support(xj)) {
            std::ostringstream msg;
            msg << "to_standard: x[" << j << "] = " << xj << " outside the support";
            throw DomainError(msg.str());
        }
        switch (m.kind) {
            case Kind::Gaussian: u(j) = (xj - m.p1) / m.p2; break;
            case Kind::Lognormal: u(j) = (std::log(xj) - m.p1) / m.p2; break;
            case Kind::Uniform: {
                const double width = m.p2 - m.p1;
                if (xj <= m.p1 || xj >= m.p2) {
                    throw DomainError("to_standard: uniform endpoint maps to infinite u");
                }
                // Use the nearer tail to keep relative precision.
                const double mid = 0.5 * (m.p1 + m.p2);
                u(j) = xj <= mid ? normal_quantile((xj - m.p1) / width)
                                 : -normal_quantile((m.p2 - xj) / width);
                break;
            }
        }
    }
    return u;
}

Eigen::VectorXd from_standard(const RandomVectorSpec& spec, const Eigen::VectorXd& u) {
    if (u.size() != spec.dimension()) throw DimensionMismatch("from_standard: dimension mismatch");
    Eigen::VectorXd x(u.size());
    for (Index j = 0; j < u.size(); ++j) {
        const auto& m = spec.marginals[static_cast<std::size_t>(j)];
        const double uj = u(j);
        switch (m.kind) {
            case Kind::Gaussian: x(j) = m.p1 + m.p2 * uj; break;
            case Kind::Lognormal: x(j) = std::exp(m.p1 + m.p2 * uj); break;
            case Kind::Uniform:
                x(j) = uj <= 0.0 ? m.p1 + (m.p2 - m.p1) * normal_cdf(uj)
                                 : m.p2 - (m.p2 - m.p1) * normal_cdf(-uj);
                break;
        }
    }
    return x;
}

Eigen::VectorXd from_standard_jacobian(const RandomVectorSpec& spec, const Eigen::VectorXd& u) {
    if (u.size() != spec.dimension()) throw DimensionMismatch("jacobian: dimension mismatch");
    Eigen::VectorXd d(u.size());
    for (Index j = 0; j < u.size(); ++j) {
        const auto& m = spec.marginals[static_cast<std::size_t>(j)];
        switch (m.kind) {
            case Kind::Gaussian: d(j) = m.p2; break;
            case Kind::Lognormal: d(j) = m.p2 * std::exp(m.p1 + m.p2 * u(j)); break;
            case Kind::Uniform: d(j) = (m.p2 - m.p1) * normal_pdf(u(j)); break;
        }
    }
    return d;
}

SamplePool::SamplePool(RandomVectorSpec spec, Index n, rng::StreamKey key,
                       std::size_t cache_limit_bytes)
    : spec_(std::move(spec)), n_(n), key_(key) {
    spec_.validate();
    if (n_ < 1) throw InvalidParameter("SamplePool: n must be >= 1");
    const auto bytes = static_cast<std::size_t>(n_) * static_cast<std::size_t>(spec_.dimension()) *
                       sizeof(double);
    if (bytes <= cache_limit_bytes) cache_ = sample(spec_, n_, key_);
}

SamplePool::BlockRef SamplePool::block(Index b, Eigen::MatrixXd& workspace) const {
    if (b < 0 || b >= block_count()) throw InvalidParameter("SamplePool: block out of range");
    if (cached()) {
        const Index first = b * kBlockRows;
        return cache_.middleRows(first, std::min(kBlockRows, n_ - first));
    }
    sample_block(spec_, n_, key_, b, workspace);
    return workspace;
}

}  // namespace aashgp::rv
