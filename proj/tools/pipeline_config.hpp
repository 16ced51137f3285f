#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cforge/experiment.hpp"

namespace cforge::cli {

/// Settings of every pipeline stage. Serialized as flat key=value lines
/// grouped under [section] headers; `seed` sits before the first section.
struct PipelineConfig {
    std::uint64_t seed = 0;

    // [paths]
    std::string kb;
    std::string corpus;
    std::string library;
    std::string out = "out";

    // [augmentation]
    int k = 10;
    double wa = 0.4;
    std::size_t top_n = 50;
    std::string filters = "abbrev,overlap,diversity";

    // [training]
    double learning_rate = 1e-4;
    std::size_t epochs = 1;
    std::size_t batch_size = 16;
    double temperature = 1.0;
    std::size_t dim = kDefaultDim;

    // [index]
    std::string quantizer = "identity";  // identity | pq
    std::size_t pq_m = 4;
    std::size_t pq_ks = 16;
    std::size_t nprobe = 0;  // 0 probes every list
    std::size_t topk = kTopK;

    // [evaluation]
    std::string split = "test";
    bool macro = false;

    // [sweep]
    std::string sweep = "k";
    std::string grid;  // comma separated; empty means the default grid

    /// Throws FormatError on unknown sections or keys and bad values.
    static PipelineConfig parse(std::string_view text);
    static PipelineConfig load(const std::string& path);
    std::string str() const;

    /// Sets one value from its "section.key" name (or "seed").
    void set(const std::string& name, const std::string& value);

    /// Range checks that do not touch the file system. Throws FormatError.
    void validate() const;

    ExperimentConfig experiment() const;

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

}  // namespace cforge::cli
