// Process-level checks of the rpflow binary (path in RPFLOW_BIN).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rpflow/io.hpp"
#include "rpflow/posterior_pipeline.hpp"
#include "rpflow/transport.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace rpflow;
namespace fs = std::filesystem;

namespace {

std::string binary() {
    const char* env = std::getenv("RPFLOW_BIN");
    REQUIRE(env != nullptr);
    return env;
}

struct RunResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

RunResult run(const std::string& args) {
    const std::string out_path = "cli_stdout.txt";
    const std::string err_path = "cli_stderr.txt";
    const std::string cmd = binary() + " " + args + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WEXITSTATUS(raw);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    r.out = slurp(out_path);
    r.err = slurp(err_path);
    return r;
}

std::string slurp_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_toy_csv(const std::string& path, std::size_t n = 16) {
    cfm::FieldObservations obs;
    obs.positions = Matrix(n, 1);
    obs.values = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        obs.positions(i, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
        obs.values(i, 0) = 0.5 + 0.3 * std::sin(6.28 * obs.positions(i, 0));
    }
    io::save_field_csv(obs, path);
}

const std::string kToyTrainFlags =
    " --iterations 150 --seed 3 --config toy_train.cfg";

void write_toy_config() {
    std::ofstream out("toy_train.cfg");
    out << "frequencies = 16\nwidth = 24\nhidden_layers = 2\nbatch_size = 16\n";
}

}  // namespace

TEST_CASE("missing data file exits nonzero and names the path") {
    RunResult r = run("train --data nowhere_to_be_found.csv --out x.ckpt");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("nowhere_to_be_found.csv") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
    write_toy_csv("toy.csv");
    {
        std::ofstream out("bad.cfg");
        out << "data = toy.csv\nnonsense_key = 1\n";
    }
    RunResult r = run("train --config bad.cfg --out x.ckpt");
    CHECK(r.exit_code == 1);
    CHECK(r.err.find("nonsense_key") != std::string::npos);
}

TEST_CASE("train with zero iterations writes the untouched initialization") {
    write_toy_csv("toy.csv");
    write_toy_config();
    RunResult r = run("train --data toy.csv --out init.ckpt --iterations 0 --seed 3"
                      " --config toy_train.cfg");
    CHECK(r.exit_code == 0);
    io::Checkpoint ckpt = io::load_checkpoint("init.ckpt");
    CHECK(ckpt.train_config.iterations == 0);

    // replicate the construction: same seed, same dims
    Rng rng(3);
    net::Mlp fresh = net::init_mlp(
        rng, {ckpt.encoder.basis.embed_dim() + ckpt.time_embedding.dim() + 1, 24, 24, 1});
    for (std::size_t i = 0; i < fresh.layers.size(); ++i)
        CHECK(fresh.layers[i].w == ckpt.net.layers[i].w);
}

TEST_CASE("training is byte-identical across reruns of the same config") {
    write_toy_csv("toy.csv");
    write_toy_config();
    CHECK(run("train --data toy.csv --out a.ckpt" + kToyTrainFlags).exit_code == 0);
    CHECK(run("train --data toy.csv --out b.ckpt" + kToyTrainFlags).exit_code == 0);
    CHECK(slurp_binary("a.ckpt") == slurp_binary("b.ckpt"));
    CHECK(slurp_binary("a.ckpt.loss.csv") == slurp_binary("b.ckpt.loss.csv"));
}

TEST_CASE("prior sampling matches the library call") {
    write_toy_csv("toy.csv");
    write_toy_config();
    REQUIRE(run("train --data toy.csv --out m.ckpt" + kToyTrainFlags).exit_code == 0);
    RunResult r = run("sample --checkpoint m.ckpt --mode prior --query-csv toy.csv --samples 1"
                      " --seed 5 --k-forward 20 --out prior.ens");
    CHECK(r.exit_code == 0);

    io::Checkpoint ckpt = io::load_checkpoint("m.ckpt");
    Matrix query = io::load_field_csv("toy.csv").positions;
    pipeline::Ensemble expect = pipeline::sample_prior(
        ckpt.net, ckpt.time_embedding, ckpt.encoder.basis, query, 1, 5, 20);
    pipeline::Ensemble got = io::load_ensemble("prior.ens");
    CHECK(got.samples[0] == expect.samples[0]);
}

TEST_CASE("posterior sampling at the training grid reproduces observations") {
    write_toy_csv("toy.csv");
    write_toy_config();
    REQUIRE(run("train --data toy.csv --out m.ckpt --iterations 400 --seed 3"
                " --config toy_train.cfg").exit_code == 0);
    RunResult r = run("sample --checkpoint m.ckpt --mode posterior --data toy.csv"
                      " --query-csv toy.csv --samples 4 --seed 6 --k-backward 100"
                      " --k-forward 100 --sigma-gp-posterior 0.08 --out post.ens");
    CHECK(r.exit_code == 0);

    io::Checkpoint ckpt = io::load_checkpoint("m.ckpt");
    cfm::FieldObservations obs = io::load_field_csv("toy.csv");
    Rng rng(9);
    Matrix probe = standard_normal(rng, obs.count(), 1);
    const double roundtrip = ode::roundtrip_error(ckpt.net, ckpt.time_embedding, ckpt.encoder,
                                                  obs.positions, probe, 100);
    pipeline::Ensemble post = io::load_ensemble("post.ens");
    for (const auto& s : post.samples)
        CHECK(sub(s, obs.values).max_abs() <= 2.0 * roundtrip + 1e-6);
}

TEST_CASE("prior mode warns when the posterior lengthscale is passed") {
    write_toy_csv("toy.csv");
    write_toy_config();
    REQUIRE(run("train --data toy.csv --out m.ckpt" + kToyTrainFlags).exit_code == 0);
    RunResult r = run("sample --checkpoint m.ckpt --mode prior --query-csv toy.csv --samples 1"
                      " --sigma-gp-posterior 0.05 --out warn.ens");
    CHECK(r.exit_code == 0);
    CHECK(r.err.find("ignored") != std::string::npos);
}

TEST_CASE("eval on an ensemble equal to the truth hits the sentinels") {
    write_toy_csv("toy.csv");
    cfm::FieldObservations obs = io::load_field_csv("toy.csv");
    pipeline::Ensemble e;
    e.positions = obs.positions;
    e.samples.assign(24, obs.values);  // degenerate, equal to the truth
    io::save_ensemble(e, "ident.ens");

    RunResult r = run("eval --ensemble ident.ens --truth toy.csv --metrics psnr,w1,pce"
                      " --out eval.csv");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("inf") != std::string::npos);  // PSNR sentinel

    std::ifstream in("eval.csv");
    std::string line, all;
    while (std::getline(in, line)) all += line + "\n";
    CHECK(all.find("w1_pooled1d,0\n") != std::string::npos);
    CHECK(all.find("pce,0.5") != std::string::npos);  // degenerate coverage
}

TEST_CASE("eval with an empty metric list emits only the header") {
    write_toy_csv("toy.csv");
    cfm::FieldObservations obs = io::load_field_csv("toy.csv");
    pipeline::Ensemble e;
    e.positions = obs.positions;
    e.samples.assign(2, obs.values);
    io::save_ensemble(e, "ident.ens");
    RunResult r = run("eval --ensemble ident.ens --truth toy.csv --metrics '' --out empty.csv");
    CHECK(r.exit_code == 0);
    std::ifstream in("empty.csv");
    std::string header, rest;
    std::getline(in, header);
    CHECK(header == "method,metric,value");
    CHECK(!std::getline(in, rest));
}

TEST_CASE("mismatched eval shapes fail cleanly") {
    write_toy_csv("toy.csv", 16);
    write_toy_csv("toy8.csv", 8);
    cfm::FieldObservations obs = io::load_field_csv("toy.csv");
    pipeline::Ensemble e;
    e.positions = obs.positions;
    e.samples.assign(2, obs.values);
    io::save_ensemble(e, "ident.ens");
    RunResult r = run("eval --ensemble ident.ens --truth toy8.csv --metrics psnr --out x.csv");
    CHECK(r.exit_code == 1);
}

TEST_CASE("experiment registry: --list and unknown names") {
    RunResult listing = run("experiment --list");
    CHECK(listing.exit_code == 0);
    CHECK(listing.out.find("t0-convergence") != std::string::npos);
    CHECK(listing.out.find("trace-interpolation") != std::string::npos);

    RunResult unknown = run("experiment --name no-such-study");
    CHECK(unknown.exit_code == 1);
    CHECK(unknown.err.find("t0-convergence") != std::string::npos);
}

TEST_CASE("inspect prints checkpoint and ensemble headers") {
    write_toy_csv("toy.csv");
    write_toy_config();
    REQUIRE(run("train --data toy.csv --out m.ckpt" + kToyTrainFlags).exit_code == 0);
    RunResult r = run("inspect m.ckpt");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("train_seed=3") != std::string::npos);
}
