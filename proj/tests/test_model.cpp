#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <unordered_map>

#include "har/model.hpp"
#include "har/nn/optim.hpp"
#include "test_util.hpp"

using namespace har;
using model::Batch;
using model::ModelConfig;
using model::ModelDims;
using model::ModelVariant;
using nn::Mode;
using nn::Parameter;
using nn::Tape;
using nn::Tensor;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.sensor_block.filters_per_kernel = 2;
    cfg.fusion_block.filters_per_kernel = 2;
    cfg.classifier_hidden = 8;
    return cfg;
}

Batch random_batch(const ModelDims& dims, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Batch batch;
    batch.sensor_images.assign(dims.sensors, Tensor{});
    for (std::size_t s = 0; s < dims.sensors; ++s) {
        batch.sensor_images[s] = test::random_tensor({n, 1, dims.channels, dims.width}, rng, 0.0, 1.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
        batch.labels.push_back(static_cast<int>(i % dims.classes));
    }
    return batch;
}

// Copies parameter values (and running stats) between models wherever the
// names match; extra parameters on either side are left alone.
void copy_matching(model::HarModel& from, model::HarModel& to) {
    std::unordered_map<std::string, Parameter*> src;
    for (Parameter* p : from.parameters()) src[p->name] = p;
    for (Parameter* p : to.parameters()) {
        auto it = src.find(p->name);
        if (it != src.end()) p->value = it->second->value;
    }
    std::unordered_map<std::string, Tensor*> src_buf;
    for (const nn::NamedBuffer& b : from.buffers()) src_buf[b.name] = b.tensor;
    for (const nn::NamedBuffer& b : to.buffers()) {
        auto it = src_buf.find(b.name);
        if (it != src_buf.end()) *b.tensor = *it->second;
    }
}

} // namespace

TEST_SUITE("feature block") {
    TEST_CASE("vector length follows the shape arithmetic") {
        model::SensorBlockConfig cfg; // 3 branches x 8 filters
        CHECK(model::FeatureBlock::vector_length(cfg, 9, 16) == 24 * 4 * 8);
        CHECK(model::FeatureBlock::vector_length(cfg, 2, 4) == 24 * 1 * 2);
        cfg.use_larger_kernels = true;
        CHECK(cfg.effective_kernels().size() == 5);
        CHECK(model::FeatureBlock::vector_length(cfg, 9, 16) == 40 * 4 * 8);
    }

    TEST_CASE("zero image maps to the zero vector") {
        std::mt19937_64 rng(3);
        model::SensorBlockConfig cfg;
        cfg.filters_per_kernel = 2;
        model::FeatureBlock block("blk", 1, cfg, rng);
        Tape tape;
        auto out = block.forward(tape, tape.input(Tensor({2, 1, 3, 8})), Mode::Train);
        for (double v : tape.value(out.vec).values()) CHECK(v == 0.0);
    }

    TEST_CASE("row-mixing kernels propagate a single-row perturbation across rows") {
        std::mt19937_64 rng(4);
        model::SensorBlockConfig cfg;
        cfg.filters_per_kernel = 2;
        model::FeatureBlock block("blk", 1, cfg, rng);

        std::mt19937_64 data_rng(5);
        Tensor base = test::random_tensor({1, 1, 3, 8}, data_rng, 0.0, 1.0);
        Tensor poked = base;
        for (std::size_t j = 0; j < 8; ++j) poked[j] += 0.25; // row 0 only

        Tape t1, t2;
        auto a = block.forward(t1, t1.input(base), Mode::Infer);
        auto b = block.forward(t2, t2.input(poked), Mode::Infer);
        const Tensor& ma = t1.value(a.concat_map);
        const Tensor& mb = t2.value(b.concat_map);
        REQUIRE(ma.shape() == nn::Shape{1, 6, 3, 8});

        // 1x3 branch (channels 0..1) must stay row-local; 3x3 and 5x5
        // branches (channels 2..5) must feel the change in other rows.
        double rowlocal_delta = 0.0, crossrow_delta = 0.0;
        for (std::size_t c = 0; c < 6; ++c)
            for (std::size_t r = 1; r < 3; ++r)
                for (std::size_t j = 0; j < 8; ++j) {
                    const double d = std::abs(ma[(c * 3 + r) * 8 + j] - mb[(c * 3 + r) * 8 + j]);
                    if (c < 2) rowlocal_delta += d;
                    else crossrow_delta += d;
                }
        CHECK(rowlocal_delta == 0.0);
        CHECK(crossrow_delta > 1e-6);
    }
}

TEST_SUITE("attention") {
    TEST_CASE("zero mixing matrix gives uniform scores for any features") {
        std::mt19937_64 rng(7);
        model::AttentionParams params("att", 3, 10, rng);
        params.W.value.fill(0.0);
        params.b.value.fill(0.0);
        Tape tape;
        auto f = tape.input(test::random_tensor({4, 3, 10}, rng, -2, 2));
        auto scores = model::attention_scores(tape, f, params);
        for (double v : tape.value(scores).values()) {
            CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
        }
    }

    TEST_CASE("scores are a probability vector for random inputs") {
        std::mt19937_64 rng(8);
        model::AttentionParams params("att", 4, 6, rng);
        Tape tape;
        auto f = tape.input(test::random_tensor({16, 4, 6}, rng, -3, 3));
        auto scores = tape.value(model::attention_scores(tape, f, params));
        for (std::size_t n = 0; n < 16; ++n) {
            double sum = 0.0;
            for (std::size_t s = 0; s < 4; ++s) {
                const double v = scores[n * 4 + s];
                CHECK(v > 0.0);
                CHECK(v < 1.0);
                sum += v;
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    TEST_CASE("row scaling: one-hot keeps one row, uniform divides by S") {
        std::mt19937_64 rng(9);
        Tensor fval = test::random_tensor({1, 3, 5}, rng);
        Tape tape;
        auto f = tape.input(fval);

        auto onehot = tape.input(Tensor({1, 3}, {0.0, 1.0, 0.0}));
        const Tensor& kept = tape.value(model::apply_attention(tape, f, onehot));
        for (std::size_t l = 0; l < 5; ++l) {
            CHECK(kept[0 * 5 + l] == 0.0);
            CHECK(kept[1 * 5 + l] == fval[1 * 5 + l]);
            CHECK(kept[2 * 5 + l] == 0.0);
        }

        auto uniform = tape.input(Tensor::full({1, 3}, 1.0 / 3.0));
        const Tensor& scaled = tape.value(model::apply_attention(tape, f, uniform));
        for (std::size_t i = 0; i < 15; ++i) CHECK(scaled[i] == doctest::Approx(fval[i] / 3.0).epsilon(1e-15));
    }

    TEST_CASE("row norms scale by the attention weight") {
        std::mt19937_64 rng(10);
        Tensor fval = test::random_tensor({2, 3, 7}, rng);
        Tensor aval = test::random_tensor({2, 3}, rng, 0.01, 0.99);
        Tape tape;
        const Tensor& fhat = tape.value(model::apply_attention(tape, tape.input(fval), tape.input(aval)));
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t s = 0; s < 3; ++s) {
                double norm_f = 0.0, norm_fhat = 0.0;
                for (std::size_t l = 0; l < 7; ++l) {
                    norm_f += fval[(n * 3 + s) * 7 + l] * fval[(n * 3 + s) * 7 + l];
                    norm_fhat += fhat[(n * 3 + s) * 7 + l] * fhat[(n * 3 + s) * 7 + l];
                }
                CHECK(std::sqrt(norm_fhat) ==
                      doctest::Approx(aval[n * 3 + s] * std::sqrt(norm_f)).epsilon(1e-12));
            }
    }
}

TEST_SUITE("har models") {
    TEST_CASE("forward emits probability rows and the attention tap") {
        const ModelDims dims{3, 3, 8, 4};
        for (ModelVariant v : {ModelVariant::Attention, ModelVariant::NoAttention, ModelVariant::EarlyFusion,
                               ModelVariant::LateFusion}) {
            auto net = model::build_model(v, dims, tiny_config(), 42);
            Batch batch = random_batch(dims, 5, 1);
            Tape tape;
            auto trace = net->forward(tape, batch, Mode::Train);
            const Tensor& probs = tape.value(trace.probs);
            REQUIRE(probs.shape() == nn::Shape{5, 4});
            for (std::size_t n = 0; n < 5; ++n) {
                double sum = 0.0;
                for (std::size_t m = 0; m < 4; ++m) sum += probs[n * 4 + m];
                CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
            }
            if (v == ModelVariant::Attention || v == ModelVariant::NoAttention) {
                REQUIRE(trace.attention != Tape::kInvalid);
                CHECK(tape.value(trace.attention).shape() == nn::Shape{5, 3});
                CHECK(trace.sensor_maps.size() == 3);
            }
        }
    }

    TEST_CASE("wrong sensor count or image shape is rejected") {
        const ModelDims dims{2, 3, 8, 2};
        auto net = model::build_attention_model(dims, tiny_config(), 1);
        Batch batch = random_batch(dims, 3, 2);
        batch.sensor_images.pop_back();
        Tape tape;
        CHECK_THROWS(net->forward(tape, batch, Mode::Train));

        Batch bad = random_batch({2, 4, 8, 2}, 3, 2); // wrong channel count
        Tape tape2;
        CHECK_THROWS(net->forward(tape2, bad, Mode::Train));
    }

    TEST_CASE("shared blocks: swapping two sensors swaps feature rows") {
        const ModelDims dims{3, 2, 8, 2};
        ModelConfig cfg = tiny_config();
        REQUIRE(cfg.shared_sensor_blocks);
        auto net = model::build_attention_model(dims, cfg, 5);

        Batch batch = random_batch(dims, 2, 3);
        Batch swapped = batch;
        std::swap(swapped.sensor_images[0], swapped.sensor_images[2]);

        Tape t1, t2;
        auto tr1 = net->forward(t1, batch, Mode::Infer);
        auto tr2 = net->forward(t2, swapped, Mode::Infer);
        const Tensor& f1 = t1.value(tr1.sensor_matrix);
        const Tensor& f2 = t2.value(tr2.sensor_matrix);
        const std::size_t l = f1.dim(2);
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t li = 0; li < l; ++li) {
                CHECK(f1[(n * 3 + 0) * l + li] == f2[(n * 3 + 2) * l + li]);
                CHECK(f1[(n * 3 + 1) * l + li] == f2[(n * 3 + 1) * l + li]);
                CHECK(f1[(n * 3 + 2) * l + li] == f2[(n * 3 + 0) * l + li]);
            }
    }

    TEST_CASE("frozen-uniform attention equals the no-attention variant") {
        const ModelDims dims{3, 2, 8, 3};
        auto with = model::build_attention_model(dims, tiny_config(), 11);
        auto without = model::build_no_attention_model(dims, tiny_config(), 99);
        copy_matching(*with, *without);
        model::AttentionParams* att = with->attention_params();
        REQUIRE(att != nullptr);
        att->W.value.fill(0.0);
        att->b.value.fill(0.0);

        Batch batch = random_batch(dims, 4, 7);
        Tape t1, t2;
        auto tr1 = with->forward(t1, batch, Mode::Infer);
        auto tr2 = without->forward(t2, batch, Mode::Infer);
        const Tensor& p1 = t1.value(tr1.probs);
        const Tensor& p2 = t2.value(tr2.probs);
        for (std::size_t i = 0; i < p1.size(); ++i) {
            CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-12));
        }
    }

    TEST_CASE("forward produces the sensor-vector length the arithmetic predicts") {
        const ModelDims dims{5, 9, 16, 19};
        ModelConfig cfg; // defaults: 3 branches x 8 filters, hidden 128
        cfg.classifier_hidden = 16;
        auto net = model::build_attention_model(dims, cfg, 3);
        Batch batch = random_batch(dims, 2, 9);
        Tape tape;
        auto trace = net->forward(tape, batch, nn::Mode::Train);
        REQUIRE(trace.sensor_matrix != Tape::kInvalid);
        CHECK(tape.value(trace.sensor_matrix).shape() == nn::Shape{2, 5, 768});
        CHECK(model::FeatureBlock::vector_length(cfg.sensor_block, 9, 16) == 768);
    }

    TEST_CASE("single-sensor fusion degenerates to a flatten") {
        const ModelDims dims{1, 3, 8, 2};
        auto net = model::build_attention_model(dims, tiny_config(), 2);
        Batch batch = random_batch(dims, 3, 5);
        Tape tape;
        auto trace = net->forward(tape, batch, Mode::Train);
        CHECK(tape.value(trace.probs).shape() == nn::Shape{3, 2});
    }

    TEST_CASE("end-to-end gradients match finite differences on a tiny model") {
        const ModelDims dims{2, 2, 4, 3};
        for (ModelVariant v :
             {ModelVariant::Attention, ModelVariant::EarlyFusion, ModelVariant::LateFusion}) {
            auto net = model::build_model(v, dims, tiny_config(), 13);
            Batch batch = random_batch(dims, 3, 17);
            auto params = net->parameters();
            auto report = nn::finite_diff_check(
                [&](bool with_grad) {
                    Tape tape;
                    auto trace = net->forward(tape, batch, Mode::Train);
                    auto loss = tape.cross_entropy_l2(trace.probs, batch.labels, params, 1e-4);
                    if (with_grad) tape.backward(loss);
                    return tape.value(loss)[0];
                },
                params);
            INFO(model::variant_name(v), ": worst ", report.worst_param, "[", report.worst_index, "]");
            CHECK(report.max_rel_err <= 1e-4);
        }
    }

    TEST_CASE("checkpoint round trip restores identical behavior") {
        namespace fs = std::filesystem;
        const fs::path dir = fs::temp_directory_path() / "har_model_ckpt";
        fs::create_directories(dir);

        const ModelDims dims{2, 3, 8, 4};
        auto net = model::build_attention_model(dims, tiny_config(), 21);
        Batch batch = random_batch(dims, 3, 23);

        // Push the running stats away from their initial values first.
        Tape warm;
        net->forward(warm, batch, Mode::Train);

        model::save_model(dir / "m.json", *net);
        auto back = model::load_model(dir / "m.json", &dims);

        Tape t1, t2;
        const Tensor& p1 = t1.value(net->forward(t1, batch, Mode::Infer).probs);
        const Tensor& p2 = t2.value(back->forward(t2, batch, Mode::Infer).probs);
        CHECK(p1.values() == p2.values());

        const ModelDims wrong{3, 3, 8, 4};
        CHECK_THROWS(model::load_model(dir / "m.json", &wrong));
        fs::remove_all(dir);
    }
}
