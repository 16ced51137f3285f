#include "cforge/ann_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "cforge/binary_io.hpp"
#include "cforge/errors.hpp"
#include "cforge/rng.hpp"

namespace cforge {

std::size_t coarse_list_count(std::size_t n)
{
    if (n == 0) {
        return 1;
    }
    const auto c = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    return std::clamp<std::size_t>(c, 1, n);
}

double l2_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return std::sqrt(s);
}

namespace {

double sq_distance(const double* a, const double* b, std::size_t dim)
{
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

std::size_t nearest(const double* x, const std::vector<double>& centroids, std::size_t k,
                    std::size_t dim)
{
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_distance(x, centroids.data() + c * dim, dim);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

bool hit_less(const SearchHit& a, const SearchHit& b)
{
    return a.distance != b.distance ? a.distance < b.distance : a.concept_id < b.concept_id;
}

}  // namespace

KMeans kmeans(std::span<const double> points, std::size_t dim, std::size_t k, std::uint64_t seed,
              std::size_t iterations, bool pin_origin)
{
    if (dim == 0 || points.size() % dim != 0) {
        throw std::invalid_argument("point buffer does not match dimension");
    }
    const std::size_t n = points.size() / dim;
    if (k == 0 || k > n) {
        throw std::invalid_argument("k-means needs 1 <= k <= n");
    }
    KMeans km;
    km.k = k;
    km.dim = dim;
    km.centroids.assign(k * dim, 0.0);
    km.assignment.assign(n, 0);
    const double* data = points.data();

    // Farthest-point start.
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::size_t placed = 0;
    auto place = [&](const double* c) {
        std::copy_n(c, dim, km.centroids.begin() + static_cast<std::ptrdiff_t>(placed * dim));
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], sq_distance(data + i * dim, c, dim));
        }
        ++placed;
    };
    if (pin_origin) {
        const std::vector<double> origin(dim, 0.0);
        place(origin.data());
    } else {
        auto rng = Rng::stream(seed, "kmeans.init");
        place(data + rng.below(n) * dim);
    }
    while (placed < k) {
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i) {
            if (min_d[i] > min_d[far]) {
                far = i;
            }
        }
        place(data + far * dim);
    }

    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < iterations; ++it) {
        bool changed = it == 0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = nearest(data + i * dim, km.centroids, k, dim);
            changed = changed || c != km.assignment[i];
            km.assignment[i] = c;
        }
        if (!changed) {
            break;
        }
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = km.assignment[i];
            ++counts[c];
            for (std::size_t j = 0; j < dim; ++j) {
                sums[c * dim + j] += data[i * dim + j];
            }
        }
        for (std::size_t c = pin_origin ? 1 : 0; c < k; ++c) {
            if (counts[c] == 0) {
                continue;
            }
            for (std::size_t j = 0; j < dim; ++j) {
                km.centroids[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        km.assignment[i] = nearest(data + i * dim, km.centroids, k, dim);
    }
    return km;
}

IvfIndex IvfIndex::build(const ConceptEmbeddings& vectors, FineQuantizer fine, std::uint64_t seed,
                         PqConfig pq)
{
    const std::size_t n = vectors.size();
    const std::size_t d = vectors.dim();
    if (n == 0 || d == 0) {
        throw DegenerateInput("cannot index an empty vector set");
    }
    for (double v : vectors.values()) {
        if (!std::isfinite(v)) {
            throw DegenerateInput("non-finite vector entry");
        }
    }
    IvfIndex idx;
    idx.dim_ = d;
    idx.fine_ = fine;
    idx.ids_ = vectors.ids();
    idx.num_lists_ = coarse_list_count(n);
    auto coarse = kmeans(vectors.values(), d, idx.num_lists_, seed);
    idx.centroids_ = std::move(coarse.centroids);
    idx.assignment_ = std::move(coarse.assignment);

    if (fine == FineQuantizer::IDENTITY) {
        idx.pq_ = PqConfig{0, 0};
        idx.raw_ = vectors.values();
    } else {
        if (pq.m == 0 || pq.ks == 0 || pq.ks > 256) {
            throw std::invalid_argument("product quantizer needs m >= 1 and 1 <= ks <= 256");
        }
        idx.pq_.m = std::min(pq.m, d);
        idx.pq_.ks = std::min(pq.ks, n);
        const std::size_t m = idx.pq_.m;
        const std::size_t ks = idx.pq_.ks;
        idx.sub_begin_.resize(m + 1);
        for (std::size_t s = 0; s <= m; ++s) {
            idx.sub_begin_[s] = s * d / m;
        }
        std::vector<double> residuals(n * d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto v = vectors.row(i);
            const auto c = idx.centroid(idx.assignment_[i]);
            for (std::size_t j = 0; j < d; ++j) {
                residuals[i * d + j] = v[j] - c[j];
            }
        }
        idx.codebooks_.assign(ks * d, 0.0);
        idx.codes_.assign(n * m, 0);
        for (std::size_t s = 0; s < m; ++s) {
            const std::size_t b = idx.sub_begin_[s];
            const std::size_t ds = idx.sub_begin_[s + 1] - b;
            std::vector<double> sub(n * ds);
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(residuals.begin() + static_cast<std::ptrdiff_t>(i * d + b), ds,
                            sub.begin() + static_cast<std::ptrdiff_t>(i * ds));
            }
            // Codeword 0 stays at the origin so no residual gets worse.
            auto km = kmeans(sub, ds, ks, seed + s + 1, 25, true);
            std::copy(km.centroids.begin(), km.centroids.end(),
                      idx.codebooks_.begin() + static_cast<std::ptrdiff_t>(ks * b));
            for (std::size_t i = 0; i < n; ++i) {
                idx.codes_[i * m + s] = static_cast<std::uint8_t>(km.assignment[i]);
            }
        }
    }
    idx.finish();
    return idx;
}

std::vector<double> IvfIndex::decode_residual(std::size_t i) const
{
    std::vector<double> r(dim_);
    if (fine_ == FineQuantizer::IDENTITY) {
        const auto c = centroid(assignment_.at(i));
        for (std::size_t j = 0; j < dim_; ++j) {
            r[j] = raw_[i * dim_ + j] - c[j];
        }
        return r;
    }
    const std::size_t m = pq_.m;
    for (std::size_t s = 0; s < m; ++s) {
        const std::size_t b = sub_begin_[s];
        const std::size_t ds = sub_begin_[s + 1] - b;
        const double* word = codebooks_.data() + pq_.ks * b + codes_.at(i * m + s) * ds;
        std::copy_n(word, ds, r.begin() + static_cast<std::ptrdiff_t>(b));
    }
    return r;
}

void IvfIndex::finish()
{
    const std::size_t n = ids_.size();
    lists_.assign(num_lists_, {});
    for (std::size_t i = 0; i < n; ++i) {
        if (assignment_[i] >= num_lists_) {
            throw FormatError("assignment out of range");
        }
        lists_[assignment_[i]].push_back(i);
    }
    if (fine_ == FineQuantizer::IDENTITY) {
        recon_ = raw_;
        return;
    }
    recon_.assign(n * dim_, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = decode_residual(i);
        const auto c = centroid(assignment_[i]);
        for (std::size_t j = 0; j < dim_; ++j) {
            recon_[i * dim_ + j] = c[j] + r[j];
        }
    }
}

std::vector<SearchHit> IvfIndex::search(std::span<const double> query,
                                        const SearchParams& params) const
{
    if (params.k == 0 || params.nprobe == 0) {
        throw std::invalid_argument("search needs k >= 1 and nprobe >= 1");
    }
    if (query.size() != dim_) {
        throw std::invalid_argument("query dimension does not match the index");
    }
    std::vector<std::pair<double, std::size_t>> order;
    order.reserve(num_lists_);
    for (std::size_t c = 0; c < num_lists_; ++c) {
        order.emplace_back(sq_distance(query.data(), centroids_.data() + c * dim_, dim_), c);
    }
    std::sort(order.begin(), order.end());
    const std::size_t probe = std::min(params.nprobe, num_lists_);
    std::vector<SearchHit> hits;
    for (std::size_t p = 0; p < num_lists_; ++p) {
        if (p >= probe && hits.size() >= params.k) {
            break;
        }
        for (const std::size_t i : lists_[order[p].second]) {
            hits.push_back(SearchHit{ids_[i], l2_distance(query, reconstruction(i))});
        }
    }
    const std::size_t k = std::min(params.k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                      hit_less);
    hits.resize(k);
    return hits;
}

void IvfIndex::save(std::ostream& out) const
{
    out.write("IVF1", 4);
    binary::write_u64(out, ids_.size());
    binary::write_u64(out, dim_);
    binary::write_u64(out, num_lists_);
    binary::write_u32(out, static_cast<std::uint32_t>(fine_));
    binary::write_u64(out, pq_.m);
    binary::write_u64(out, pq_.ks);
    for (const auto& id : ids_) {
        binary::write_string(out, id.str());
    }
    binary::write_f64s(out, centroids_);
    for (const std::size_t a : assignment_) {
        binary::write_u64(out, a);
    }
    if (fine_ == FineQuantizer::IDENTITY) {
        binary::write_f64s(out, raw_);
    } else {
        binary::write_f64s(out, codebooks_);
        out.write(reinterpret_cast<const char*>(codes_.data()),
                  static_cast<std::streamsize>(codes_.size()));
    }
}

IvfIndex IvfIndex::load(std::istream& in)
{
    binary::expect_magic(in, "IVF1");
    IvfIndex idx;
    const auto n = binary::read_u64(in);
    idx.dim_ = binary::read_u64(in);
    idx.num_lists_ = binary::read_u64(in);
    const auto kind = binary::read_u32(in);
    idx.pq_.m = binary::read_u64(in);
    idx.pq_.ks = binary::read_u64(in);
    if (n == 0 || n > (1u << 26) || idx.dim_ == 0 || idx.dim_ > 4096 || idx.num_lists_ == 0 ||
        idx.num_lists_ > n || kind > 1) {
        throw FormatError("index header out of range");
    }
    idx.fine_ = static_cast<FineQuantizer>(kind);
    if (idx.fine_ == FineQuantizer::PRODUCT &&
        (idx.pq_.m == 0 || idx.pq_.m > idx.dim_ || idx.pq_.ks == 0 || idx.pq_.ks > 256)) {
        throw FormatError("product quantizer descriptor out of range");
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        idx.ids_.push_back(ConceptId::parse(binary::read_string(in)));
    }
    idx.centroids_.resize(idx.num_lists_ * idx.dim_);
    binary::read_f64s(in, idx.centroids_);
    idx.assignment_.resize(n);
    for (auto& a : idx.assignment_) {
        a = binary::read_u64(in);
    }
    if (idx.fine_ == FineQuantizer::IDENTITY) {
        idx.raw_.resize(n * idx.dim_);
        binary::read_f64s(in, idx.raw_);
    } else {
        const std::size_t m = idx.pq_.m;
        idx.sub_begin_.resize(m + 1);
        for (std::size_t s = 0; s <= m; ++s) {
            idx.sub_begin_[s] = s * idx.dim_ / m;
        }
        idx.codebooks_.resize(idx.pq_.ks * idx.dim_);
        binary::read_f64s(in, idx.codebooks_);
        idx.codes_.resize(n * m);
        in.read(reinterpret_cast<char*>(idx.codes_.data()),
                static_cast<std::streamsize>(idx.codes_.size()));
        if (!in) {
            throw FormatError("truncated file");
        }
        for (const auto c : idx.codes_) {
            if (c >= idx.pq_.ks) {
                throw FormatError("product quantizer code out of range");
            }
        }
    }
    idx.finish();
    return idx;
}

void IvfIndex::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write index '" + path + "'");
    }
    save(out);
}

IvfIndex IvfIndex::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open index '" + path + "'");
    }
    return load(in);
}

std::vector<SearchHit> exact_search(const ConceptEmbeddings& vectors, std::span<const double> query,
                                    std::size_t k)
{
    std::vector<SearchHit> hits;
    hits.reserve(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        hits.push_back(SearchHit{vectors.ids()[i], l2_distance(query, vectors.row(i))});
    }
    k = std::min(k, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(),
                      hit_less);
    hits.resize(k);
    return hits;
}

double recall_at_k(std::span<const SearchHit> approx, std::span<const SearchHit> exact)
{
    if (exact.empty()) {
        return 1.0;
    }
    std::size_t found = 0;
    for (const auto& e : exact) {
        found += static_cast<std::size_t>(std::any_of(approx.begin(), approx.end(), [&](const SearchHit& a) {
            return a.concept_id == e.concept_id;
        }));
    }
    return static_cast<double>(found) / static_cast<double>(exact.size());
}

}  // namespace cforge
