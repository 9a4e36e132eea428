#include <doctest.h>

#include <fstream>

#include "cnts/errors.hpp"
#include "cnts/models.hpp"
#include "test_support.hpp"

using namespace cnts;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

ReconstructorModel identity_reconstructor(std::size_t l) {
    DenseNet net;
    DenseLayer layer;
    layer.weights = Matrix(l, l);
    for (std::size_t i = 0; i < l; ++i) layer.weights(i, i) = 1.0;
    layer.bias.assign(l, 0.0);
    layer.act = Activation::Identity;
    net.layers.push_back(layer);
    return {net, l};
}

WindowBatch batch_from_matrix(Matrix m) {
    WindowBatch batch;
    batch.origins.resize(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) batch.origins[i] = i;
    batch.stride = 1;
    batch.windows = std::move(m);
    return batch;
}

} // namespace

TEST_CASE("identity-configured reconstructor reproduces its input") {
    Rng rng(3);
    auto model = identity_reconstructor(6);
    WindowBatch batch = batch_from_matrix(ts::random_matrix(rng, 4, 6, -3.0, 3.0));
    Matrix out = reconstruct(model, batch);
    REQUIRE(out.rows == 4);
    REQUIRE(out.cols == 6);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        CHECK(out.data[i] == batch.windows.data[i]);
    }
}

TEST_CASE("reconstruct and detect keep the batch shape") {
    Rng rng(5);
    auto r = make_reconstructor(8, {}, 1);
    auto d = make_detector(8, {16}, 2);
    WindowBatch batch = batch_from_matrix(ts::random_matrix(rng, 5, 8));
    CHECK(reconstruct(r, batch).rows == 5);
    CHECK(reconstruct(r, batch).cols == 8);
    CHECK(detect(d, batch).rows == 5);
    CHECK(detect(d, batch).cols == 8);

    WindowBatch wrong = batch_from_matrix(ts::random_matrix(rng, 5, 7));
    CHECK_THROWS_AS(reconstruct(r, wrong), ShapeError);
    CHECK_THROWS_AS(detect(d, wrong), ShapeError);
}

TEST_CASE("zero-weight detector emits its bias everywhere") {
    auto d = make_detector(4, {4}, 9);
    for (auto& layer : d.net.layers) {
        for (double& w : layer.weights.data) w = 0.0;
        for (double& b : layer.bias) b = 0.0;
    }
    d.net.layers.back().bias.assign(4, 1.25);

    Rng rng(11);
    WindowBatch batch = batch_from_matrix(ts::random_matrix(rng, 3, 4));
    Matrix scores = detect(d, batch);
    for (double s : scores.data) CHECK(s == 1.25);
}

TEST_CASE("inference is batch-order equivariant") {
    Rng rng(13);
    auto r = make_reconstructor(6, {12}, 4);
    Matrix m = ts::random_matrix(rng, 6, 6);
    WindowBatch batch = batch_from_matrix(m);
    Matrix out = reconstruct(r, batch);

    // Reverse the rows and compare.
    Matrix reversed(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            reversed(i, j) = m(m.rows - 1 - i, j);
        }
    }
    Matrix out_reversed = reconstruct(r, batch_from_matrix(reversed));
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            CHECK(out_reversed(i, j) == out(m.rows - 1 - i, j));
        }
    }
}

TEST_CASE("checkpoint round-trip is bit-identical") {
    auto dir = ts::scratch_dir("ckpt");
    auto r = make_reconstructor(8, {16, 8}, 77);
    auto d = make_detector(8, {16, 8}, 78);

    save_checkpoint(r, (dir / "r.ckpt").string(), "cfg123");
    save_checkpoint(d, (dir / "d.ckpt").string(), "cfg123");

    auto r2 = load_reconstructor((dir / "r.ckpt").string());
    auto d2 = load_detector((dir / "d.ckpt").string());
    CHECK(r2.window_len == 8);
    CHECK(param_digest(r2.net) == param_digest(r.net));
    CHECK(param_digest(d2.net) == param_digest(d.net));
    REQUIRE(r2.net.layers.size() == r.net.layers.size());
    for (std::size_t k = 0; k < r.net.layers.size(); ++k) {
        CHECK(r2.net.layers[k].act == r.net.layers[k].act);
        for (std::size_t i = 0; i < r.net.layers[k].weights.data.size(); ++i) {
            CHECK(r2.net.layers[k].weights.data[i] == r.net.layers[k].weights.data[i]);
        }
    }

    Checkpoint ckpt = load_checkpoint((dir / "r.ckpt").string());
    CHECK(ckpt.config_digest == "cfg123");
    CHECK(ckpt.kind == ModelKind::Reconstructor);
    CHECK(ckpt.dims == r.net.dims());

    fs::remove_all(dir);
}

TEST_CASE("checkpoint load failures are distinct") {
    auto dir = ts::scratch_dir("ckpt_bad");
    auto r = make_reconstructor(4, {8}, 5);
    auto path = dir / "r.ckpt";
    save_checkpoint(r, path.string(), "");

    // Truncated payload.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        std::ofstream out(dir / "trunc.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 16));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "trunc.ckpt").string()),
                         doctest::Contains("truncated payload"), ValidationError);

    // Payload longer than dims imply.
    {
        std::ifstream in(path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
        bytes.append(8, '\0');
        std::ofstream out(dir / "long.ckpt", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "long.ckpt").string()),
                         doctest::Contains("disagrees"), ValidationError);

    // Foreign version tag.
    {
        std::ofstream out(dir / "vers.ckpt", std::ios::binary);
        out << "CNTS9junk";
    }
    CHECK_THROWS_WITH_AS(load_checkpoint((dir / "vers.ckpt").string()),
                         doctest::Contains("version"), ValidationError);

    // Kind mismatch: a detector where a reconstructor is expected.
    auto d = make_detector(4, {8}, 6);
    save_checkpoint(d, (dir / "d.ckpt").string(), "");
    CHECK_THROWS_AS(load_reconstructor((dir / "d.ckpt").string()), ValidationError);
    CHECK_THROWS_AS(load_detector(path.string()), ValidationError);

    CHECK_THROWS_AS(load_checkpoint((dir / "missing.ckpt").string()), IoError);

    fs::remove_all(dir);
}
