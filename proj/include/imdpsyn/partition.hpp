#pragma once

#include "imdpsyn/geometry.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace imdpsyn {

using LocationId = std::int64_t;

/** Rectangular tiling of a domain box plus one absorbing sink location for
 * everything outside the domain.
 *
 * Region ids are row-major over the per-dimension indices (dimension 0
 * slowest); the sink id equals the number of regions. Interior faces are
 * shared exactly between neighbours: region i's upper bound in a dimension is
 * bitwise equal to region i+1's lower bound.
 */
class Partition {
  public:
    Partition() = default;

    Partition(HyperRectangle domain, std::vector<int> counts)
        : domain_(std::move(domain)), counts_(std::move(counts)) {
        if (static_cast<Eigen::Index>(counts_.size()) != domain_.dim())
            throw std::invalid_argument("Partition: counts dimension does not match domain");
        region_count_ = 1;
        for (int c : counts_) {
            if (c < 1) throw std::invalid_argument("Partition: per-dimension count must be >= 1");
            region_count_ *= c;
        }
        width_ = Eigen::VectorXd(domain_.dim());
        for (Eigen::Index i = 0; i < domain_.dim(); ++i) {
            width_(i) = (domain_.upper(i) - domain_.lower(i)) / counts_[i];
            if (!(width_(i) > 0))
                throw std::invalid_argument("Partition: domain is degenerate in dimension "
                                            + std::to_string(i));
        }
    }

    Eigen::Index dim() const { return domain_.dim(); }
    const HyperRectangle& domain() const { return domain_; }
    const std::vector<int>& counts() const { return counts_; }
    const Eigen::VectorXd& widths() const { return width_; }

    LocationId region_count() const { return region_count_; }
    LocationId sink_id() const { return region_count_; }
    LocationId location_count() const { return region_count_ + 1; }

    std::vector<int> multi_index(LocationId id) const {
        std::vector<int> idx(counts_.size());
        for (Eigen::Index i = dim() - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(id % counts_[i]);
            id /= counts_[i];
        }
        return idx;
    }

    LocationId flatten(const std::vector<int>& idx) const {
        LocationId id = 0;
        for (Eigen::Index i = 0; i < dim(); ++i) id = id * counts_[i] + idx[i];
        return id;
    }

    HyperRectangle region(LocationId id) const {
        if (id < 0 || id >= region_count_)
            throw std::invalid_argument("Partition::region: id out of range");
        const auto idx = multi_index(id);
        Eigen::VectorXd lo(dim()), up(dim());
        for (Eigen::Index i = 0; i < dim(); ++i) {
            lo(i) = domain_.lower(i) + idx[i] * width_(i);
            up(i) = idx[i] + 1 == counts_[i] ? domain_.upper(i)
                                             : domain_.lower(i) + (idx[i] + 1) * width_(i);
        }
        return HyperRectangle(std::move(lo), std::move(up));
    }

    Eigen::VectorXd region_center(LocationId id) const {
        const HyperRectangle r = region(id);
        return 0.5 * (r.lower + r.upper);
    }

    /** Location of a point: the sink for points strictly outside the domain,
     * otherwise the region found by per-dimension floor division, clamped so
     * that upper-boundary points fall in the last region (fixed tie-break:
     * shared interior faces belong to the higher-index region).
     */
    LocationId locate(const Eigen::VectorXd& x) const {
        if (x.size() != dim())
            throw std::invalid_argument("Partition::locate: dimension mismatch");
        LocationId id = 0;
        for (Eigen::Index i = 0; i < dim(); ++i) {
            if (x(i) < domain_.lower(i) || x(i) > domain_.upper(i)) return sink_id();
            auto k = static_cast<std::int64_t>(std::floor((x(i) - domain_.lower(i)) / width_(i)));
            if (k < 0) k = 0;
            if (k >= counts_[i]) k = counts_[i] - 1;
            id = id * counts_[i] + k;
        }
        return id;
    }

  private:
    HyperRectangle domain_;
    std::vector<int> counts_;
    Eigen::VectorXd width_;
    LocationId region_count_ = 0;
};

inline Partition build_partition(const HyperRectangle& domain, const std::vector<int>& counts) {
    return Partition(domain, counts);
}

}  // namespace imdpsyn
