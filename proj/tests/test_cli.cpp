#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "support.hpp"
#include "topomap/serialize.hpp"

using namespace topomap;
namespace fs = std::filesystem;

namespace {

/// Runs the CLI with stdout/stderr captured to files in `dir`; returns the exit code.
int run(const fs::path& dir, const std::string& args) {
    const std::string cmd = std::string("\"") + TOPOMAP_CLI + "\" " + args + " >\"" + (dir / "stdout.txt").string() +
                            "\" 2>\"" + (dir / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

/// Small synthetic data set shared by the tests of one case.
fs::path synth(const fs::path& dir, const std::string& extra = "") {
    REQUIRE(run(dir, "synth -o " + q(dir / "data") + " --neurons 30 --groups 4 --clusters 2 --examples 30 --seed 3 " +
                         extra) == 0);
    return dir / "data" / "manifest.json";
}

}  // namespace

TEST_CASE("synth and nap") {
    testing::TempDir tmp("cli_nap");
    const fs::path manifest = synth(tmp.path);
    CHECK(fs::exists(tmp.path / "data" / "activations.npy"));
    CHECK(fs::exists(tmp.path / "data" / "provenance_synth.json"));

    REQUIRE(run(tmp.path, "nap -o " + q(tmp.path / "n") + " --manifest " + q(manifest) + " --samples 10") == 0);
    const NapMatrix nap = load_nap(tmp.path / "n" / "nap.json");
    CHECK(nap.units() == 30);
    CHECK(nap.group_count() == 4);
    CHECK(nap.seed == 3);  // defaults to the manifest seed
    CHECK(fs::exists(tmp.path / "n" / "nap_layout_features.npy"));

    SUBCASE("invalid mode is a usage error") {
        CHECK(run(tmp.path, "nap -o " + q(tmp.path / "x") + " --manifest " + q(manifest) + " --mode bogus") == 2);
    }
    SUBCASE("stacked mode on a conv layer is a domain error") {
        const fs::path conv = tmp.path / "conv";
        REQUIRE(run(tmp.path, "synth -o " + q(conv) + " --neurons 6 --groups 2 --examples 5 --height 3 --width 3") == 0);
        CHECK(run(tmp.path, "nap -o " + q(tmp.path / "y") + " --manifest " + q(conv / "manifest.json") +
                                " --mode balanced") == 1);
        CHECK(!slurp(tmp.path / "stderr.txt").empty());
    }
    SUBCASE("missing manifest is a domain error") {
        CHECK(run(tmp.path, "nap -o " + q(tmp.path / "z") + " --manifest " + q(tmp.path / "missing.json")) == 1);
    }
}

TEST_CASE("layout") {
    testing::TempDir tmp("cli_layout");
    const fs::path manifest = synth(tmp.path);
    const fs::path out = tmp.path / "run";
    REQUIRE(run(tmp.path, "nap -o " + q(out) + " --manifest " + q(manifest) + " --samples 10") == 0);

    SUBCASE("stochastic method is reproducible under a seed") {
        REQUIRE(run(tmp.path, "layout -o " + q(out) + " --method umap_pso --seed 7 --pso-steps 50") == 0);
        const std::string first = slurp(out / "layout.json");
        REQUIRE(run(tmp.path, "layout -o " + q(out) + " --method umap_pso --seed 7 --pso-steps 50") == 0);
        CHECK(slurp(out / "layout.json") == first);
        REQUIRE(run(tmp.path, "layout -o " + q(out) + " --method umap_pso --seed 8 --pso-steps 50") == 0);
        CHECK(slurp(out / "layout.json") != first);
    }
    SUBCASE("method parameters are recorded") {
        REQUIRE(run(tmp.path, "layout -o " + q(out) + " --method graph --edge-fraction 0.2") == 0);
        const Layout l = load_layout(out / "layout.json");
        CHECK(l.params["edge_fraction"].get<double>() == 0.2);
        const auto prov = read_json(out / "provenance_layout.json");
        CHECK(prov["layout"]["params"]["edge_fraction"].get<double>() == 0.2);
        CHECK(prov["config"]["edge_fraction"].get<double>() == 0.2);
    }
    SUBCASE("bad values") {
        CHECK(run(tmp.path, "layout -o " + q(out) + " --method nope") == 2);
        CHECK(run(tmp.path, "layout -o " + q(out)) == 2);
        CHECK(run(tmp.path, "layout -o " + q(out) + " --method graph --edge-fraction 1.5") == 2);
        CHECK(run(tmp.path, "layout -o " + q(out) + " --method pso --pso-steps 0") == 2);
    }
}

TEST_CASE("render and eval") {
    testing::TempDir tmp("cli_render");
    const fs::path manifest = synth(tmp.path);
    const fs::path out = tmp.path / "run";
    REQUIRE(run(tmp.path, "nap -o " + q(out) + " --manifest " + q(manifest) + " --samples 10") == 0);
    REQUIRE(run(tmp.path, "layout -o " + q(out) + " --method pca_pso --pso-steps 50") == 0);

    SUBCASE("render writes images") {
        REQUIRE(run(tmp.path, "render -o " + q(out) + " --svg --sort --resolution 40") == 0);
        CHECK(fs::file_size(out / "topomap.png") > 0);
        CHECK(slurp(out / "topomap.svg").find("<svg") != std::string::npos);
    }
    SUBCASE("mismatched neuron ids are rejected") {
        REQUIRE(run(tmp.path, "synth -o " + q(tmp.path / "other") + " --neurons 20 --groups 4 --examples 10") == 0);
        REQUIRE(run(tmp.path, "nap -o " + q(tmp.path / "other") + " --manifest " + q(tmp.path / "other" / "manifest.json")) ==
                0);
        CHECK(run(tmp.path, "render -o " + q(out) + " --nap " + q(tmp.path / "other" / "nap.json")) == 1);
    }
    SUBCASE("single evaluation") {
        REQUIRE(run(tmp.path, "eval -o " + q(out)) == 0);
        const auto blur = read_json(out / "quality_blur.json");
        CHECK(blur["per_param_mse"].size() == 10);
        CHECK(blur["auc"].get<double>() > 0.0);
        CHECK(!fs::exists(out / "trials.csv"));
        std::istringstream csv(slurp(out / "auc_long.csv"));
        std::string line;
        int lines = 0;
        while (std::getline(csv, line)) ++lines;
        CHECK(lines == 3);
    }
    SUBCASE("trials write one CSV row each") {
        REQUIRE(run(tmp.path, "eval -o " + q(out) + " --method som_pso --trials 3 --seed 5 --pso-steps 30 --jobs 2") == 0);
        std::istringstream csv(slurp(out / "trials.csv"));
        std::string line;
        std::getline(csv, line);
        CHECK(line == "trial,seed,blur_auc,resize_auc");
        std::getline(csv, line);
        CHECK(line.rfind("0,5,", 0) == 0);
        std::getline(csv, line);
        CHECK(line.rfind("1,6,", 0) == 0);
        CHECK(read_json(out / "quality_blur.json")["summary"]["n"] == 3);
    }
    SUBCASE("resampled trials rebuild the NAP matrix") {
        REQUIRE(run(tmp.path, "eval -o " + q(out) + " --method pca_pso --trials 2 --resample --pso-steps 30") == 0);
        const auto blur = read_json(out / "quality_blur.json");
        CHECK(blur["trials"].size() == 2);
        CHECK(blur["trials"][0].get<double>() != blur["trials"][1].get<double>());
    }
}

TEST_CASE("pipeline") {
    testing::TempDir tmp("cli_pipeline");
    const fs::path manifest = synth(tmp.path);

    SUBCASE("reruns are byte-identical") {
        const std::string args = " --manifest " + q(manifest) + " --samples 10 --method tsne_pso --seed 2 --pso-steps 40 "
                                 "--tsne-iterations 300 --resolution 40";
        REQUIRE(run(tmp.path, "pipeline -o " + q(tmp.path / "a") + args) == 0);
        REQUIRE(run(tmp.path, "pipeline -o " + q(tmp.path / "b") + args) == 0);
        for (const char* name : {"nap.json", "nap_layout_features.npy", "nap_color_values.npy", "layout.json",
                                 "topomap.png", "quality_blur.json", "quality_resize.json", "auc_long.csv"})
            CHECK_MESSAGE(slurp(tmp.path / "a" / name) == slurp(tmp.path / "b" / name), name);
        CHECK(fs::exists(tmp.path / "a" / "provenance.json"));
    }
    SUBCASE("flags override the config file") {
        const fs::path cfg = tmp.path / "config.json";
        write_json(cfg, {{"manifest", "data/manifest.json"},
                         {"samples", 10},
                         {"method", "graph"},
                         {"edge_fraction", 0.3},
                         {"resolution", 30}});
        REQUIRE(run(tmp.path, "pipeline --config " + q(cfg) + " -o " + q(tmp.path / "c") + " --edge-fraction 0.25") == 0);
        const Layout l = load_layout(tmp.path / "c" / "layout.json");
        CHECK(l.method == Method::graph);
        CHECK(l.params["edge_fraction"].get<double>() == 0.25);
        const auto prov = read_json(tmp.path / "c" / "provenance.json");
        CHECK(prov["config"]["resolution"] == 30);
    }
    SUBCASE("unknown method is a usage error") {
        CHECK(run(tmp.path, "pipeline -o " + q(tmp.path / "d") + " --manifest " + q(manifest) + " --method spiral") == 2);
    }
    SUBCASE("failures name the stage") {
        CHECK(run(tmp.path, "pipeline -o " + q(tmp.path / "e") + " --manifest " + q(manifest) +
                                " --method pca --samples 10 --grid " + q(tmp.path / "nogrid.json")) == 1);
        CHECK(slurp(tmp.path / "stderr.txt").find("stage render") != std::string::npos);
    }
}
