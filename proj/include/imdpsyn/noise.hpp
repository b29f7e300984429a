#pragma once

#include "imdpsyn/random.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace imdpsyn {

namespace detail {

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// from rounding are clamped to zero.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success)
        throw std::invalid_argument("noise covariance: eigendecomposition failed");
    Eigen::VectorXd lam = es.eigenvalues();
    const double scale = lam.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (lam(i) < -1e-9 * (scale > 0 ? scale : 1.0))
            throw std::invalid_argument("noise covariance is not positive semidefinite");
        lam(i) = lam(i) > 0 ? std::sqrt(lam(i)) : 0.0;
    }
    return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/** Source of i.i.d. noise vectors.
 *
 * Two base kinds: a seeded Gaussian generator (mean + covariance) and a fixed
 * table of samples loaded from a file. A grouped source lumps m consecutive
 * base draws into one draw of the m-step dynamics.
 *
 * Draws are addressed by (stream, index): sample i of a given stream is a pure
 * function of the stream key and i, so concurrent evaluation order is
 * irrelevant. File-backed sources return rows verbatim for indices < N and
 * pseudo-random rows (bootstrap resampling) beyond that.
 */
class NoiseSource {
  public:
    static NoiseSource gaussian(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance) {
        if (covariance.rows() != covariance.cols() || covariance.rows() != mean.size())
            throw std::invalid_argument("gaussian noise: covariance must be square and match mean");
        if (!covariance.isApprox(covariance.transpose(), 1e-12))
            throw std::invalid_argument("gaussian noise: covariance must be symmetric");
        NoiseSource s;
        s.dim_ = static_cast<int>(mean.size());
        s.mean_ = std::move(mean);
        s.transform_ = detail::psd_sqrt(covariance);
        return s;
    }

    /// Plain-text sample file: one sample per line, whitespace-separated
    /// decimals, '#' starts a comment line.
    static NoiseSource from_file(const std::string& path, int expected_dim) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("sample file '" + path + "' cannot be opened");
        std::vector<Eigen::VectorXd> rows;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::istringstream ls(line);
            std::vector<double> vals;
            double v;
            while (ls >> v) vals.push_back(v);
            if (vals.empty()) continue;
            if (static_cast<int>(vals.size()) != expected_dim)
                throw std::invalid_argument("sample file '" + path + "' line "
                                            + std::to_string(lineno) + ": expected "
                                            + std::to_string(expected_dim) + " values, got "
                                            + std::to_string(vals.size()));
            rows.push_back(Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size()));
        }
        if (rows.empty())
            throw std::invalid_argument("sample file '" + path + "' contains no samples");
        NoiseSource s;
        s.dim_ = expected_dim;
        s.table_ = std::make_shared<std::vector<Eigen::VectorXd>>(std::move(rows));
        return s;
    }

    /// m-step lumped source: draw i combines base draws i*m .. i*m+m-1 as
    /// sum_j A^(m-1-j) eta_j.
    static NoiseSource grouped(NoiseSource base, const Eigen::MatrixXd& A, int m) {
        if (m < 1) throw std::invalid_argument("grouped noise: m must be >= 1");
        if (m == 1) return base;
        NoiseSource s;
        s.dim_ = base.dim_;
        s.group_ = std::make_shared<Grouping>();
        s.group_->base = std::make_shared<NoiseSource>(std::move(base));
        s.group_->powers.resize(m);
        Eigen::MatrixXd P = Eigen::MatrixXd::Identity(A.rows(), A.cols());
        for (int j = m - 1; j >= 0; --j) {
            s.group_->powers[j] = P;  // A^(m-1-j)
            P = A * P;
        }
        return s;
    }

    int dim() const { return dim_; }
    bool is_file_backed() const { return table_ != nullptr || (group_ && group_->base->is_file_backed()); }

    /// Number of draws available without resampling (unbounded for generators).
    std::uint64_t max_iid_draws() const {
        if (group_) {
            const auto base = group_->base->max_iid_draws();
            return base == kUnbounded ? kUnbounded : base / group_->powers.size();
        }
        if (table_) return table_->size();
        return kUnbounded;
    }

    static constexpr std::uint64_t kUnbounded = ~std::uint64_t{0};

    /// Draw with the given stream and sample index.
    Eigen::VectorXd sample(const RandomStream& stream, std::uint64_t index) const {
        if (group_) {
            const int m = static_cast<int>(group_->powers.size());
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
            for (int j = 0; j < m; ++j)
                acc += group_->powers[j]
                       * group_->base->sample(stream, index * static_cast<std::uint64_t>(m) + j);
            return acc;
        }
        if (table_) {
            const auto& t = *table_;
            if (index < t.size()) return t[index];
            // beyond the table: bootstrap rows, still deterministic per (stream, index)
            return t[stream.bits(index) % t.size()];
        }
        Eigen::VectorXd z(dim_);
        for (int j = 0; j < dim_; ++j)
            z(j) = stream.normal(index * static_cast<std::uint64_t>(dim_) + j);
        return mean_ + transform_ * z;
    }

  private:
    struct Grouping {
        std::shared_ptr<NoiseSource> base;
        std::vector<Eigen::MatrixXd> powers;
    };

    int dim_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd transform_;
    std::shared_ptr<std::vector<Eigen::VectorXd>> table_;
    std::shared_ptr<Grouping> group_;
};

/// Noise samples drawn once and reused for every action of a run.
struct SampleSet {
    std::vector<Eigen::VectorXd> samples;
    std::uint64_t seed = 0;

    static SampleSet draw(const NoiseSource& source, std::size_t count, std::uint64_t seed) {
        if (count < 1) throw std::invalid_argument("SampleSet: sample count must be >= 1");
        if (count > source.max_iid_draws())
            throw std::invalid_argument("SampleSet: requested " + std::to_string(count)
                                        + " samples but the file-backed source provides only "
                                        + std::to_string(source.max_iid_draws()));
        SampleSet s;
        s.seed = seed;
        s.samples.reserve(count);
        RandomStream stream(seed, kTagScenarioSamples);
        for (std::size_t i = 0; i < count; ++i)
            s.samples.push_back(source.sample(stream, i));
        return s;
    }

    std::size_t size() const { return samples.size(); }
};

}  // namespace imdpsyn
