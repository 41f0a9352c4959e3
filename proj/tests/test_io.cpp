#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "rpflow/experiments.hpp"
#include "rpflow/io.hpp"

#include <filesystem>
#include <fstream>

using namespace rpflow;
namespace fs = std::filesystem;

#ifndef RPFLOW_TEST_DATA
#define RPFLOW_TEST_DATA "."
#endif

namespace {

io::Image random_image(std::size_t h, std::size_t w, std::size_t channels, std::size_t maxval,
                       std::uint64_t seed) {
    io::Image img;
    img.height = h;
    img.width = w;
    img.channels = channels;
    img.maxval = maxval;
    img.values = Matrix(h * w, channels);
    Rng rng(seed);
    const double scale = static_cast<double>(maxval);
    for (std::size_t i = 0; i < img.values.size(); ++i)
        img.values.data()[i] =
            static_cast<double>(rng.uniform_index(maxval + 1)) / scale;  // representable levels
    return img;
}

}  // namespace

TEST_CASE("pgm 8-bit round trip is lossless") {
    io::Image img = random_image(11, 7, 1, 255, 1);
    io::save_image(img, "rt8.pgm");
    io::Image back = io::load_image("rt8.pgm");
    CHECK(back.height == 11);
    CHECK(back.width == 7);
    CHECK(back.maxval == 255);
    CHECK(sub(back.values, img.values).max_abs() < 1e-12);
}

TEST_CASE("pgm 16-bit and ppm 3-channel round trips") {
    io::Image img16 = random_image(6, 9, 1, 65535, 2);
    io::save_image(img16, "rt16.pgm");
    io::Image back16 = io::load_image("rt16.pgm");
    CHECK(back16.maxval == 65535);
    CHECK(sub(back16.values, img16.values).max_abs() < 1e-9);

    io::Image rgb = random_image(5, 5, 3, 255, 3);
    io::save_image(rgb, "rt.ppm");
    io::Image back_rgb = io::load_image("rt.ppm");
    CHECK(back_rgb.channels == 3);  // maps to m=3
    CHECK(sub(back_rgb.values, rgb.values).max_abs() < 1e-12);
}

TEST_CASE("image loader rejects malformed input") {
    {
        std::ofstream out("trunc.pgm", std::ios::binary);
        out << "P5\n4 4\n255\n";
        out << "ab";  // payload cut short
    }
    CHECK_THROWS_AS(io::load_image("trunc.pgm"), IoError);

    {
        std::ofstream out("badmagic.pgm", std::ios::binary);
        out << "P7\n4 4\n255\n0000000000000000";
    }
    CHECK_THROWS_AS(io::load_image("badmagic.pgm"), IoError);
    CHECK_THROWS_AS(io::load_image("does_not_exist.pgm"), IoError);
}

TEST_CASE("image header comments are skipped") {
    {
        std::ofstream out("comment.pgm", std::ios::binary);
        out << "P5\n# a comment line\n2 2\n255\n";
        const unsigned char px[4] = {0, 64, 128, 255};
        out.write(reinterpret_cast<const char*>(px), 4);
    }
    io::Image img = io::load_image("comment.pgm");
    CHECK(img.width == 2);
    CHECK(img.values(3, 0) == doctest::Approx(1.0));
}

TEST_CASE("field csv round trip and header inference") {
    Rng rng(4);
    cfm::FieldObservations obs;
    obs.positions = standard_normal(rng, 6, 2);
    obs.values = standard_normal(rng, 6, 3);
    io::save_field_csv(obs, "field.csv");
    cfm::FieldObservations back = io::load_field_csv("field.csv");
    CHECK(back.dim() == 2);  // inferred from x0,x1
    CHECK(back.channels() == 3);
    CHECK(sub(back.positions, obs.positions).max_abs() == 0.0);
    CHECK(sub(back.values, obs.values).max_abs() == 0.0);
}

TEST_CASE("field csv single row and error paths") {
    {
        std::ofstream out("one.csv");
        out << "x0,v0\n0.5,0.25\n";
    }
    cfm::FieldObservations one = io::load_field_csv("one.csv");
    CHECK(one.count() == 1);
    CHECK(one.values(0, 0) == 0.25);

    {
        std::ofstream out("ragged.csv");
        out << "x0,v0\n0.5,0.25\n0.5\n";
    }
    CHECK_THROWS_AS(io::load_field_csv("ragged.csv"), IoError);

    {
        std::ofstream out("nonnum.csv");
        out << "x0,v0\n0.5,abc\n";
    }
    CHECK_THROWS_AS(io::load_field_csv("nonnum.csv"), IoError);

    {
        std::ofstream out("badheader.csv");
        out << "a,b\n0.5,0.25\n";
    }
    CHECK_THROWS_AS(io::load_field_csv("badheader.csv"), IoError);
}

TEST_CASE("checkpoint round trip is bitwise") {
    cfm::FieldObservations obs;
    obs.positions = io::image_grid(6, 6);
    obs.values = test_oracle::synthetic_image_values(6, 9);

    experiments::RpFlowConfig cfg;
    cfg.frequencies = 12;
    cfg.sigma_rff = 5.0;
    cfg.width = 16;
    cfg.hidden_layers = 2;
    cfg.train.iterations = 30;
    cfg.train.batch_size = 8;
    cfg.train.ema_decay = 0.98;
    cfg.train.seed = 9;
    experiments::RpFlowModel model = experiments::train_rpflow(obs, cfg);

    io::Checkpoint ckpt;
    ckpt.encoder = model.encoder;
    ckpt.time_embedding = model.time_embedding;
    ckpt.net = model.net;
    ckpt.train_config = cfg.train;
    ckpt.ema_shadow = model.ema->layers;
    ckpt.ema_decay = 0.98;

    io::save_checkpoint(ckpt, "model.ckpt");
    io::Checkpoint back = io::load_checkpoint("model.ckpt");
    CHECK(back.encoder.kind == rff::EncoderKind::rff);
    CHECK(back.encoder.basis.b == ckpt.encoder.basis.b);
    CHECK(back.encoder.basis.sigma_rff == 5.0);
    CHECK(back.net.layers.size() == ckpt.net.layers.size());
    for (std::size_t i = 0; i < ckpt.net.layers.size(); ++i) {
        CHECK(back.net.layers[i].w == ckpt.net.layers[i].w);
        CHECK(back.net.layers[i].b == ckpt.net.layers[i].b);
        CHECK((*back.ema_shadow)[i].w == (*ckpt.ema_shadow)[i].w);
    }
    CHECK(back.train_config.ema_decay.value() == 0.98);
    CHECK(back.train_config.seed == 9);

    // saving the loaded copy reproduces the file byte for byte
    io::save_checkpoint(back, "model2.ckpt");
    std::ifstream f1("model.ckpt", std::ios::binary);
    std::ifstream f2("model2.ckpt", std::ios::binary);
    std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(s1 == s2);
}

TEST_CASE("golden checkpoint from the test corpus still loads") {
    const std::string path = std::string(RPFLOW_TEST_DATA) + "/golden_v1.ckpt";
    io::Checkpoint ckpt = io::load_checkpoint(path);
    CHECK(ckpt.encoder.kind == rff::EncoderKind::rff);
    CHECK(ckpt.encoder.basis.frequencies() == 8);
    CHECK(ckpt.encoder.basis.sigma_rff == 4.0);
    CHECK(ckpt.time_embedding.pairs == 8);
    CHECK(ckpt.net.layers.size() == 3);
    CHECK(ckpt.train_config.seed == 42);
    CHECK(ckpt.net.param_count() == 849);
    CHECK(ckpt.net.layers[0].w(0, 0) == doctest::Approx(0.082856069858978726).epsilon(1e-15));
}

TEST_CASE("ensemble container round trip") {
    pipeline::Ensemble e;
    e.positions = io::image_grid(3, 4);
    Rng rng(11);
    e.samples.push_back(rng.normal_matrix(12, 2));
    e.samples.push_back(rng.normal_matrix(12, 2));
    e.provenance = pipeline::Provenance::posterior;
    e.seed = 77;
    e.joint_block = 6;
    io::save_ensemble(e, "e.ens");
    pipeline::Ensemble back = io::load_ensemble("e.ens");
    CHECK(back.count() == 2);
    CHECK(back.provenance == pipeline::Provenance::posterior);
    CHECK(back.seed == 77);
    CHECK(back.joint_block == 6);
    CHECK(back.positions == e.positions);
    CHECK(back.samples[1] == e.samples[1]);

    io::save_summary_csv(back, "e.summary.csv");
    std::ifstream in("e.summary.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "x0,x1,mean0,mean1,std0,std1");
}

TEST_CASE("config parsing, comments, overrides, unknown keys") {
    io::Config cfg = io::Config::from_string(
        "# leading comment\n"
        "iterations = 100\n"
        "lr = 0.001   # trailing comment\n"
        "name = toy\n"
        "\n");
    CHECK(cfg.get_int("iterations") == 100);
    CHECK(cfg.get_double("lr") == doctest::Approx(0.001));
    CHECK(cfg.get_string("name") == "toy");
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.get_string("missing"), InvalidParam);
    CHECK_THROWS_AS(cfg.get_int("name"), InvalidParam);

    CHECK_NOTHROW(cfg.reject_unknown({"iterations", "lr", "name"}));
    CHECK_THROWS_AS(cfg.reject_unknown({"iterations", "lr"}), InvalidParam);

    CHECK_THROWS_AS(io::Config::from_string("novalue\n"), InvalidParam);

    cfg.set("lr", "0.5");  // override wins
    CHECK(cfg.get_double("lr") == 0.5);
}
