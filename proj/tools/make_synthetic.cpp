// Writes a synthetic benchmark plus a pipeline config pointing at it.
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cforge/errors.hpp"
#include "cforge/synthetic.hpp"
#include "pipeline_config.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Generate a synthetic concept extraction benchmark", "cforge-synth"};
    std::string dir = "synthetic";
    cforge::SyntheticConfig sc;
    app.add_option("--out", dir, "Output directory");
    app.add_option("--seed", sc.seed, "Generator seed");
    app.add_option("--concepts", sc.concepts, "Number of target concepts");
    app.add_option("--rare", sc.rare, "Concepts with few manual examples");
    app.add_option("--label-noise", sc.label_noise, "Share of wrong annotator top candidates");
    CLI11_PARSE(app, argc, argv);

    try {
        const auto bench = cforge::make_synthetic_benchmark(sc);
        cforge::write_synthetic_benchmark(bench, dir);

        namespace fs = std::filesystem;
        cforge::cli::PipelineConfig cfg;
        cfg.seed = sc.seed;
        cfg.kb = (fs::path(dir) / "kb.jsonl").string();
        cfg.corpus = (fs::path(dir) / "corpus").string();
        cfg.library = (fs::path(dir) / "library").string();
        cfg.out = (fs::path(dir) / "out").string();
        cfg.learning_rate = 0.05;
        cfg.epochs = 10;
        std::ofstream out(fs::path(dir) / "pipeline.cfg", std::ios::binary);
        out << cfg.str();
        if (!out) {
            throw cforge::Error("cannot write pipeline.cfg");
        }
        std::cout << "cforge-synth: " << bench.kb.size() << " KB entries, " << bench.train.size()
                  << " train / " << bench.dev.size() << " dev / " << bench.test.size()
                  << " test / " << bench.library.size() << " library documents in " << dir << '\n';
    } catch (const std::exception& e) {
        std::cerr << "cforge-synth: error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
