#include "pipeline_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "cforge/errors.hpp"

namespace cforge::cli {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& name, const std::string& value)
{
    T v{};
    const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
    if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
        throw FormatError("bad value '" + value + "' for " + name);
    }
    return v;
}

bool parse_bool(const std::string& name, const std::string& value)
{
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw FormatError("bad value '" + value + "' for " + name + " (expected true or false)");
}

std::string number(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace

void PipelineConfig::set(const std::string& name, const std::string& value)
{
    if (name == "seed") {
        seed = parse_number<std::uint64_t>(name, value);
    } else if (name == "paths.kb") {
        kb = value;
    } else if (name == "paths.corpus") {
        corpus = value;
    } else if (name == "paths.library") {
        library = value;
    } else if (name == "paths.out") {
        out = value;
    } else if (name == "augmentation.k") {
        k = parse_number<int>(name, value);
    } else if (name == "augmentation.wa") {
        wa = parse_number<double>(name, value);
    } else if (name == "augmentation.top_n") {
        top_n = parse_number<std::size_t>(name, value);
    } else if (name == "augmentation.filters") {
        filters = value;
    } else if (name == "training.learning_rate") {
        learning_rate = parse_number<double>(name, value);
    } else if (name == "training.epochs") {
        epochs = parse_number<std::size_t>(name, value);
    } else if (name == "training.batch_size") {
        batch_size = parse_number<std::size_t>(name, value);
    } else if (name == "training.temperature") {
        temperature = parse_number<double>(name, value);
    } else if (name == "training.dim") {
        dim = parse_number<std::size_t>(name, value);
    } else if (name == "index.quantizer") {
        quantizer = value;
    } else if (name == "index.pq_m") {
        pq_m = parse_number<std::size_t>(name, value);
    } else if (name == "index.pq_ks") {
        pq_ks = parse_number<std::size_t>(name, value);
    } else if (name == "index.nprobe") {
        nprobe = parse_number<std::size_t>(name, value);
    } else if (name == "index.topk") {
        topk = parse_number<std::size_t>(name, value);
    } else if (name == "evaluation.split") {
        split = value;
    } else if (name == "evaluation.macro") {
        macro = parse_bool(name, value);
    } else if (name == "sweep.kind") {
        sweep = value;
    } else if (name == "sweep.grid") {
        grid = value;
    } else {
        throw FormatError("unknown config key '" + name + "'");
    }
}

PipelineConfig PipelineConfig::parse(std::string_view text)
{
    PipelineConfig cfg;
    std::string section;
    std::size_t lineno = 0;
    std::istringstream in{std::string(text)};
    std::string raw;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') {
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw FormatError("config line " + std::to_string(lineno) + ": unterminated section");
            }
            section = std::string(trim(line.substr(1, line.size() - 2)));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError("config line " + std::to_string(lineno) + ": expected key=value");
        }
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        try {
            cfg.set(section.empty() ? key : section + "." + key, value);
        } catch (const FormatError& e) {
            throw FormatError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw FormatError("cannot open config '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string PipelineConfig::str() const
{
    std::ostringstream os;
    os << "seed=" << seed << "\n\n";
    os << "[paths]\nkb=" << kb << "\ncorpus=" << corpus << "\nlibrary=" << library
       << "\nout=" << out << "\n\n";
    os << "[augmentation]\nk=" << k << "\nwa=" << number(wa) << "\ntop_n=" << top_n
       << "\nfilters=" << filters << "\n\n";
    os << "[training]\nlearning_rate=" << number(learning_rate) << "\nepochs=" << epochs
       << "\nbatch_size=" << batch_size << "\ntemperature=" << number(temperature)
       << "\ndim=" << dim << "\n\n";
    os << "[index]\nquantizer=" << quantizer << "\npq_m=" << pq_m << "\npq_ks=" << pq_ks
       << "\nnprobe=" << nprobe << "\ntopk=" << topk << "\n\n";
    os << "[evaluation]\nsplit=" << split << "\nmacro=" << (macro ? "true" : "false") << "\n\n";
    os << "[sweep]\nkind=" << sweep << "\ngrid=" << grid << "\n";
    return os.str();
}

void PipelineConfig::validate() const
{
    auto fail = [](const std::string& what) { throw FormatError(what); };
    if (k < 0) {
        fail("--k must be >= 0");
    }
    if (!(wa >= 0.0)) {
        fail("--wa must be >= 0");
    }
    if (top_n == 0) {
        fail("augmentation.top_n must be >= 1");
    }
    FilterSet::parse(filters);
    if (!(learning_rate >= 0.0)) {
        fail("training.learning_rate must be >= 0");
    }
    if (batch_size == 0) {
        fail("training.batch_size must be >= 1");
    }
    if (!(temperature > 0.0)) {
        fail("training.temperature must be > 0");
    }
    if (dim == 0 || dim > 4096) {
        fail("--dim must be in [1, 4096]");
    }
    if (quantizer != "identity" && quantizer != "pq") {
        fail("index.quantizer must be identity or pq");
    }
    if (pq_m == 0 || pq_ks == 0 || pq_ks > 256) {
        fail("index.pq_m must be >= 1 and index.pq_ks in [1, 256]");
    }
    if (topk == 0) {
        fail("--topk must be >= 1");
    }
    if (split != "train" && split != "dev" && split != "test") {
        fail("evaluation.split must be train, dev or test");
    }
    const auto kind = parse_sweep_kind(sweep);
    if (!grid.empty()) {
        std::istringstream in(grid);
        std::string v;
        while (std::getline(in, v, ',')) {
            apply_grid_value(kind, v, experiment());
        }
    }
}

ExperimentConfig PipelineConfig::experiment() const
{
    ExperimentConfig e;
    e.aug.k = k;
    e.aug.w_a = wa;
    e.aug.top_n_candidates = top_n;
    e.aug.seed = seed;
    e.train.w_a = wa;
    e.train.learning_rate = learning_rate;
    e.train.epochs = epochs;
    e.train.batch_size = batch_size;
    e.train.temperature = temperature;
    e.train.seed = seed;
    e.filters = FilterSet::parse(filters);
    e.dim = dim;
    e.fine = quantizer == "pq" ? FineQuantizer::PRODUCT : FineQuantizer::IDENTITY;
    e.pq = PqConfig{pq_m, pq_ks};
    e.nprobe = nprobe;
    e.report.macro = macro;
    e.report.k = topk;
    return e;
}

}  // namespace cforge::cli
