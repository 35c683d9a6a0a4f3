#include "qwha/pipeline.hpp"
#include "qwha/tensor_io.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <string>

using namespace qwha;

namespace {

// Integration tests drive the installed binary; CMake passes its location
// through QWHA_CLI.
std::string cli_path() {
    const char* p = std::getenv("QWHA_CLI");
    return p ? p : "";
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("full pipeline through the subcommands") {
    if (cli_path().empty()) return;  // library-only build
    test::TempDir tmp("cli_flow");
    REQUIRE(run_cli("synth --kind heavy-tailed-spikes --rows 32 --cols 32 --samples 64"
                    " --seed 3 --out-weights " + tmp.path("w.sadp") +
                    " --out-activations " + tmp.path("x.sadp")) == 0);
    REQUIRE(run_cli("quantize --weights " + tmp.path("w.sadp") +
                    " --bits 4 --group-size 16 --out " + tmp.path("q.sadq") +
                    " --out-error " + tmp.path("e.sadp")) == 0);
    REQUIRE(run_cli("calibrate --activations " + tmp.path("x.sadp") + " --out " +
                    tmp.path("r.sadp")) == 0);
    REQUIRE(run_cli("init --delta " + tmp.path("e.sadp") + " --calibration " +
                    tmp.path("r.sadp") + " --p 96 --seed 1 --out " + tmp.path("a.sada") +
                    " --report " + tmp.path("chan.json")) == 0);
    REQUIRE(run_cli("eval --delta " + tmp.path("e.sadp") + " --adapter " +
                    tmp.path("a.sada") + " --calibration " + tmp.path("r.sadp") +
                    " --json " + tmp.path("report.json") + " --csv " +
                    tmp.path("report.csv")) == 0);
    CHECK(read_adapter(tmp.path("a.sada")).p() == 96);
    CHECK(slurp(tmp.path("report.csv")).find("pre_error") != std::string::npos);

    // idempotence: rerunning init with the same seed reproduces the bytes
    REQUIRE(run_cli("init --delta " + tmp.path("e.sadp") + " --calibration " +
                    tmp.path("r.sadp") + " --p 96 --seed 1 --out " + tmp.path("b.sada")) ==
            0);
    CHECK(slurp(tmp.path("a.sada")) == slurp(tmp.path("b.sada")));
}

TEST_CASE("exit codes: validation 2, I/O 3") {
    if (cli_path().empty()) return;
    test::TempDir tmp("cli_codes");
    REQUIRE(run_cli("synth --rows 8 --cols 8 --out-weights " + tmp.path("w.sadp")) == 0);
    CHECK(run_cli("quantize --weights " + tmp.path("w.sadp") + " --bits 1 --out " +
                  tmp.path("q.sadq")) == 2);
    CHECK(run_cli("quantize --weights " + tmp.path("nope.sadp") + " --out " +
                  tmp.path("q.sadq")) == 3);
    CHECK(run_cli("bench --sizes 8 --repeats 0") == 2);
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("pipeline subcommand writes the adapter and report") {
    if (cli_path().empty()) return;
    test::TempDir tmp("cli_pipe");
    REQUIRE(run_cli("synth --kind heavy-tailed-spikes --rows 32 --cols 32 --samples 64"
                    " --seed 9 --out-weights " + tmp.path("w.sadp") +
                    " --out-activations " + tmp.path("x.sadp")) == 0);
    REQUIRE(run_cli("pipeline --weights " + tmp.path("w.sadp") + " --activations " +
                    tmp.path("x.sadp") + " --out-dir " + tmp.path("run") +
                    " --bits 2 --group-size 16 --rank-equivalent 2 --seed 4") == 0);
    CHECK(read_adapter(tmp.path("run/adapter.sada")).p() == 2 * 64);
    CHECK(slurp(tmp.path("run/report.json")).find("post_error") != std::string::npos);

    // both budget flags together is a validation error
    CHECK(run_cli("pipeline --weights " + tmp.path("w.sadp") + " --activations " +
                  tmp.path("x.sadp") + " --out-dir " + tmp.path("run2") +
                  " --p 64 --rank-equivalent 2") == 2);
}

TEST_CASE("run_pipeline is deterministic across thread counts") {
    test::TempDir tmp("pipe_threads");
    write_matrix(test::random_matrix(32, 32, 55), tmp.path("w.sadp"));
    write_matrix(test::random_matrix(32, 80, 56), tmp.path("x.sadp"));

    auto run = [&](int threads, const std::string& dir) {
        PipelineConfig cfg;
        cfg.weights_file = tmp.path("w.sadp");
        cfg.activation_files = {tmp.path("x.sadp")};
        cfg.out_dir = tmp.path(dir);
        cfg.bits = 3;
        cfg.group_size = 16;
        cfg.p = 128;
        cfg.seed = 11;
        cfg.threads = threads;
        return run_pipeline(cfg);
    };
    const PipelineResult r1 = run(1, "t1");
    const PipelineResult r4 = run(4, "t4");
    CHECK(slurp(r1.adapter_path) == slurp(r4.adapter_path));
    CHECK(r1.report.post_error == r4.report.post_error);
    CHECK(r1.report.post_error < r1.report.pre_error);
}

}  // TEST_SUITE
