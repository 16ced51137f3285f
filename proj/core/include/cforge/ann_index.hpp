#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cforge/encoder.hpp"
#include "cforge/types.hpp"

namespace cforge {

enum class FineQuantizer : std::uint8_t { IDENTITY, PRODUCT };

struct PqConfig {
    std::size_t m = 4;    // sub-quantizers
    std::size_t ks = 16;  // codewords per sub-quantizer, at most 256
};

struct SearchParams {
    std::size_t k = 10;
    std::size_t nprobe = 1;
};

struct SearchHit {
    ConceptId concept_id;
    double distance = 0.0;

    friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

/// round(sqrt(n)) clamped to [1, n].
std::size_t coarse_list_count(std::size_t n);

struct KMeans {
    std::size_t k = 0;
    std::size_t dim = 0;
    std::vector<double> centroids;        // k x dim
    std::vector<std::size_t> assignment;  // per point
};

/// Lloyd's algorithm from a seeded farthest-point start. With `pin_origin`
/// centroid 0 stays at the origin. Empty clusters keep their centroid;
/// distance ties go to the lower index. Requires 1 <= k <= n.
KMeans kmeans(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
              std::size_t iterations = 25, bool pin_origin = false);

double l2_distance(std::span<const double> a, std::span<const double> b);

/// Inverted-file index: coarse k-means lists plus an encoded residual per
/// vector. Immutable once built.
class IvfIndex {
  public:
    /// Throws DegenerateInput on an empty table or a non-finite entry.
    static IvfIndex build(const ConceptEmbeddings& vectors, FineQuantizer fine, std::uint64_t seed,
                          PqConfig pq = {});

    std::size_t size() const noexcept { return ids_.size(); }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t num_lists() const noexcept { return num_lists_; }
    FineQuantizer fine_quantizer() const noexcept { return fine_; }
    const PqConfig& pq() const noexcept { return pq_; }
    const std::vector<ConceptId>& ids() const noexcept { return ids_; }
    std::size_t assignment(std::size_t i) const { return assignment_.at(i); }
    std::span<const double> centroid(std::size_t c) const
    {
        return {centroids_.data() + c * dim_, dim_};
    }
    const std::vector<std::size_t>& list(std::size_t c) const { return lists_.at(c); }

    /// Decoded residual of vector i.
    std::vector<double> decode_residual(std::size_t i) const;
    /// centroid + decoded residual; the original vector for IDENTITY.
    std::span<const double> reconstruction(std::size_t i) const
    {
        return {recon_.data() + i * dim_, dim_};
    }

    /// Probes the nprobe nearest lists (more when they hold fewer than k
    /// vectors), ranks by the distance between the query and each
    /// reconstruction. Ascending distance, ties by concept id.
    std::vector<SearchHit> search(std::span<const double> query, const SearchParams& params) const;

    /// "IVF1", N, D, |C|, quantizer descriptor, ids, centroids, assignments,
    /// codes (and PQ codebooks).
    void save(std::ostream& out) const;
    static IvfIndex load(std::istream& in);
    void save(const std::string& path) const;
    static IvfIndex load(const std::string& path);

  private:
    void finish();

    std::size_t dim_ = 0;
    std::size_t num_lists_ = 0;
    FineQuantizer fine_ = FineQuantizer::IDENTITY;
    PqConfig pq_;
    std::vector<ConceptId> ids_;
    std::vector<double> centroids_;
    std::vector<std::size_t> assignment_;
    std::vector<double> raw_;             // IDENTITY: N x D original vectors
    std::vector<double> codebooks_;       // PRODUCT: m x ks x sub-dim blocks
    std::vector<std::uint8_t> codes_;     // PRODUCT: N x m
    std::vector<std::size_t> sub_begin_;  // m + 1 boundaries
    std::vector<std::vector<std::size_t>> lists_;
    std::vector<double> recon_;
};

/// Full-scan top-k by L2 distance, ties by concept id.
std::vector<SearchHit> exact_search(const ConceptEmbeddings& vectors, std::span<const double> query,
                                    std::size_t k);

/// |approx ∩ exact| / |exact| over concept ids.
double recall_at_k(std::span<const SearchHit> approx, std::span<const SearchHit> exact);

}  // namespace cforge
