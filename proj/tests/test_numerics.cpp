#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gazelab/errors.hpp"
#include "gazelab/gradcheck.hpp"
#include "gazelab/layers.hpp"
#include "gazelab/params.hpp"
#include "gazelab/rng.hpp"
#include "gazelab/serialize.hpp"

using namespace gazelab;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

// Central-difference check of grad_inputs for a layer under the linear loss
// L = sum(coeffs * forward(inputs)). Returns the worst relative error.
// coeff_lo/hi control conditioning: all-positive coefficients avoid
// cancelled near-zero gradients whose FD estimate is pure roundoff.
double fd_input_check(const Layer& layer, std::vector<Tensor> inputs, Rng& rng, double eps = 1e-5,
                      double coeff_lo = -1.0, double coeff_hi = 1.0) {
    const Tensor out = layer_forward(layer, std::span<const Tensor>(inputs));
    Tensor coeffs = random_tensor(out.shape, rng, coeff_lo, coeff_hi);
    const LayerGrads grads = layer_backward(layer, std::span<const Tensor>(inputs), coeffs);
    auto loss = [&](const std::vector<Tensor>& ins) {
        const Tensor o = layer_forward(layer, std::span<const Tensor>(ins));
        double s = 0.0;
        for (std::size_t i = 0; i < o.numel(); ++i) s += coeffs.v[i] * o.v[i];
        return s;
    };
    double worst = 0.0;
    for (std::size_t t = 0; t < inputs.size(); ++t)
        for (std::size_t e = 0; e < inputs[t].numel(); ++e) {
            const double orig = inputs[t].v[e];
            inputs[t].v[e] = orig + eps;
            const double up = loss(inputs);
            inputs[t].v[e] = orig - eps;
            const double dn = loss(inputs);
            inputs[t].v[e] = orig;
            const double numeric = (up - dn) / (2.0 * eps);
            const double analytic = grads.inputs[t].v[e];
            const double denom = std::max(1e-8, std::fabs(analytic) + std::fabs(numeric));
            worst = std::max(worst, std::fabs(analytic - numeric) / denom);
        }
    return worst;
}

// Wraps a single layer into a one-branch ParamSet for grad_check.
ParamSet single_layer_set(const Layer& layer) {
    ParamSet p;
    p.branches.push_back({"main", {layer}});
    return p;
}

double param_grad_check(const Layer& layer, const Tensor& input, Rng& rng, double eps = 1e-5) {
    const Tensor out = layer_forward(layer, input);
    const Tensor coeffs = random_tensor(out.shape, rng);
    auto loss = [&](const ParamSet& p) {
        const Tensor o = layer_forward(p.branches[0].layers[0], input);
        double s = 0.0;
        for (std::size_t i = 0; i < o.numel(); ++i) s += coeffs.v[i] * o.v[i];
        return s;
    };
    auto grad = [&](const ParamSet& p) {
        ParamSet g = zero_like(p);
        const LayerGrads lg = layer_backward(p.branches[0].layers[0], input, coeffs);
        g.branches[0].layers[0].params = lg.params;
        return g;
    };
    return grad_check(single_layer_set(layer), loss, grad, eps);
}

}  // namespace

TEST_CASE("dense with identity weights is the identity map") {
    Layer l = Layer::dense(2, 2);
    l.params[0].at(0, 0) = 1.0;
    l.params[0].at(1, 1) = 1.0;
    const Tensor out = layer_forward(l, Tensor({2}, {1.0, 2.0}));
    CHECK(out.v[0] == 1.0);
    CHECK(out.v[1] == 2.0);
}

TEST_CASE("conv2d 1x1 identity kernel copies the image") {
    Layer l = Layer::conv2d(1, 1, 1, 1, 0);
    l.params[0].v[0] = 1.0;
    Rng rng(7);
    const Tensor img = random_tensor({5, 9, 1}, rng, 0.0, 1.0);
    const Tensor out = layer_forward(l, img);
    CHECK(out.bit_equal(img));
}

TEST_CASE("relu definition") {
    const Tensor out = layer_forward(Layer::relu(), Tensor({3}, {-1.0, 0.0, 2.0}));
    CHECK(out.v == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("forward rejects shape mismatches naming both shapes") {
    Layer l = Layer::dense(4, 2);
    try {
        layer_forward(l, Tensor({3}, {1, 2, 3}));
        FAIL("expected invalid_argument");
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[3]") != std::string::npos);
        CHECK(msg.find("4") != std::string::npos);
    }
    Layer c = Layer::conv2d(2, 4, 3, 1, 1);
    CHECK_THROWS_AS(layer_forward(c, Tensor({8, 8, 3})), std::invalid_argument);
}

TEST_CASE("dense backward: scalar output, grad one, weight grads equal the input") {
    Layer l = Layer::dense(3, 1);
    Rng rng(3);
    for (double& w : l.params[0].v) w = rng.uniform(-1, 1);
    const Tensor x({3}, {0.5, -2.0, 3.25});
    const LayerGrads g = layer_backward(l, x, Tensor({1}, {1.0}));
    for (int i = 0; i < 3; ++i) CHECK(g.params[0].v[i] == x.v[i]);
    CHECK(g.params[1].v[0] == 1.0);
}

TEST_CASE("relu backward gates the incoming gradient") {
    const LayerGrads g = layer_backward(Layer::relu(), Tensor({2}, {-1.0, 2.0}), Tensor({2}, {1.0, 1.0}));
    CHECK(g.inputs[0].v == std::vector<double>{0.0, 1.0});
}

TEST_CASE("conv2d random instance matches central finite differences") {
    Rng rng(11);
    Layer l = Layer::conv2d(2, 3, 3, 1, 1);
    init_layer_params(l, rng);
    const Tensor img = random_tensor({6, 7, 2}, rng);
    CHECK(param_grad_check(l, img, rng) < 1e-6);
    CHECK(fd_input_check(l, {img}, rng) < 1e-6);
}

TEST_CASE("strided and padded conv2d gradients") {
    Rng rng(12);
    for (int stride : {1, 2}) {
        Layer l = Layer::conv2d(3, 4, 3, stride, 1);
        for (double& w : l.params[0].v) w = rng.uniform(0.1, 0.5);
        const Tensor img = random_tensor({8, 10, 3}, rng, 0.1, 1.0);
        CHECK(param_grad_check(l, img, rng) < 1e-6);
        CHECK(fd_input_check(l, {img}, rng, 1e-5, 0.5, 1.5) < 1e-6);
    }
}

TEST_CASE("isolated gradient checks for every layer kind") {
    Rng rng(21);
    SUBCASE("dense") {
        Layer l = Layer::dense(6, 4);
        init_layer_params(l, rng);
        const Tensor x = random_tensor({6}, rng);
        CHECK(param_grad_check(l, x, rng) < 1e-6);
        CHECK(fd_input_check(l, {x}, rng) < 1e-6);
    }
    SUBCASE("relu, inputs held away from the kink") {
        Tensor x = random_tensor({4, 6, 2}, rng);
        for (double& v : x.v) v += v >= 0.0 ? 0.1 : -0.1;
        CHECK(fd_input_check(Layer::relu(), {x}, rng) < 1e-6);
    }
    SUBCASE("tanh") {
        CHECK(fd_input_check(Layer::tanh_unit(), {random_tensor({3, 5, 2}, rng)}, rng) < 1e-6);
    }
    SUBCASE("upsample2x") {
        CHECK(fd_input_check(Layer::upsample2x(), {random_tensor({3, 4, 3}, rng)}, rng) < 1e-6);
    }
    SUBCASE("concat-broadcast") {
        std::vector<Tensor> ins = {random_tensor({3, 4, 2}, rng), random_tensor({3}, rng),
                                   random_tensor({5}, rng)};
        CHECK(fd_input_check(Layer::concat_broadcast(), ins, rng) < 1e-6);
    }
}

TEST_CASE("parameter counts follow the documented formulas") {
    CHECK(Layer::dense(10, 4).param_count() == 10 * 4 + 4);
    CHECK(Layer::conv2d(8, 16, 3, 2, 1).param_count() == 3 * 3 * 8 * 16 + 16);
    CHECK(Layer::relu().param_count() == 0);
    CHECK(Layer::tanh_unit().param_count() == 0);
    CHECK(Layer::upsample2x().param_count() == 0);
    CHECK(Layer::concat_broadcast().param_count() == 0);
    // the stored tensors agree with the formula
    Layer d = Layer::dense(10, 4);
    CHECK(d.params[0].numel() + d.params[1].numel() == d.param_count());
}

TEST_CASE("forward never changes params") {
    Rng rng(5);
    Layer l = Layer::conv2d(2, 2, 3, 1, 1);
    init_layer_params(l, rng);
    const Layer before = l;
    (void)layer_forward(l, random_tensor({8, 8, 2}, rng));
    for (std::size_t i = 0; i < l.params.size(); ++i) CHECK(l.params[i].bit_equal(before.params[i]));
}

TEST_CASE("shape algebra over the test grid") {
    Rng rng(9);
    const std::vector<std::pair<int, int>> grid = {{8, 16}, {16, 32}, {32, 64}};
    for (auto [h, w] : grid) {
        Tensor img = random_tensor({h, w, 4}, rng);
        for (Layer l : {Layer::conv2d(4, 6, 3, 1, 1), Layer::conv2d(4, 6, 3, 2, 1),
                        Layer::relu(), Layer::tanh_unit(), Layer::upsample2x()}) {
            if (l.kind == LayerKind::Conv2d) init_layer_params(l, rng);
            std::vector<std::vector<int>> in_shapes = {img.shape};
            const Tensor out = layer_forward(l, img);
            CHECK(out.shape == layer_output_shape(l, in_shapes));
            const LayerGrads g = layer_backward(l, img, out);
            CHECK(g.inputs[0].shape == img.shape);
        }
        Layer d = Layer::dense(h * w * 4, 16);
        init_layer_params(d, rng);
        const Tensor dout = layer_forward(d, img);
        CHECK(dout.shape == std::vector<int>{16});
        CHECK(layer_backward(d, img, dout).inputs[0].shape == img.shape);

        std::vector<Tensor> cb = {img, random_tensor({3}, rng)};
        const Tensor cbout = layer_forward(Layer::concat_broadcast(), std::span<const Tensor>(cb));
        CHECK(cbout.shape == std::vector<int>{h, w, 7});
    }
}

TEST_CASE("sgd_update applies p -= lr*g on masked branches only") {
    ParamSet p;
    p.branches.push_back({"A", {Layer::dense(1, 1)}});
    p.branches.push_back({"B", {Layer::dense(1, 1)}});
    p.branches[0].layers[0].params[0].v[0] = 1.0;
    p.branches[1].layers[0].params[0].v[0] = 1.0;
    ParamSet g = zero_like(p);
    g.branches[0].layers[0].params[0].v[0] = 0.5;
    g.branches[1].layers[0].params[0].v[0] = 0.5;

    const ParamSet q = sgd_update(p, g, 0.1, {"A"});
    CHECK(q.branches[0].layers[0].params[0].v[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(q.branch_bit_equal(p, "B"));

    SUBCASE("excluded branch is bit-identical after 100 updates") {
        ParamSet cur = p;
        for (int i = 0; i < 100; ++i) cur = sgd_update(cur, g, 0.1, {"A"});
        CHECK(cur.branch_bit_equal(p, "B"));
        CHECK(!cur.branch_bit_equal(p, "A"));
    }
    SUBCASE("empty mask is rejected") {
        CHECK_THROWS_AS(sgd_update(p, g, 0.1, {}), std::invalid_argument);
    }
    SUBCASE("unknown branch is rejected") {
        CHECK_THROWS_AS(sgd_update(p, g, 0.1, {"C"}), std::invalid_argument);
    }
    SUBCASE("structure mismatch is rejected") {
        ParamSet bad = g;
        bad.branches.pop_back();
        CHECK_THROWS_AS(sgd_update(p, bad, 0.1, {"A"}), std::invalid_argument);
    }
}

TEST_CASE("grad_check harness") {
    Rng rng(33);
    SUBCASE("single dense layer with L2 loss") {
        Layer l = Layer::dense(5, 3);
        init_layer_params(l, rng);
        const Tensor x = random_tensor({5}, rng);
        const Tensor target = random_tensor({3}, rng);
        auto loss = [&](const ParamSet& p) {
            const Tensor o = layer_forward(p.branches[0].layers[0], x);
            double s = 0.0;
            for (int i = 0; i < 3; ++i) s += (o.v[i] - target.v[i]) * (o.v[i] - target.v[i]);
            return 0.5 * s;
        };
        auto grad = [&](const ParamSet& p) {
            const Tensor o = layer_forward(p.branches[0].layers[0], x);
            Tensor go({3});
            for (int i = 0; i < 3; ++i) go.v[i] = o.v[i] - target.v[i];
            ParamSet g = zero_like(p);
            g.branches[0].layers[0].params = layer_backward(p.branches[0].layers[0], x, go).params;
            return g;
        };
        CHECK(grad_check(single_layer_set(l), loss, grad, 1e-5) < 1e-6);
    }
    SUBCASE("zero loss gives exactly zero") {
        Layer l = Layer::dense(2, 2);
        auto loss = [](const ParamSet&) { return 0.0; };
        auto grad = [](const ParamSet& p) { return zero_like(p); };
        CHECK(grad_check(single_layer_set(l), loss, grad, 1e-5) == 0.0);
    }
    SUBCASE("eps outside (0, 1e-2] is rejected") {
        Layer l = Layer::dense(2, 2);
        auto loss = [](const ParamSet&) { return 0.0; };
        auto grad = [](const ParamSet& p) { return zero_like(p); };
        CHECK_THROWS_AS(grad_check(single_layer_set(l), loss, grad, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(grad_check(single_layer_set(l), loss, grad, 0.1), std::invalid_argument);
    }
    SUBCASE("non-finite loss is rejected") {
        Layer l = Layer::dense(2, 2);
        auto loss = [](const ParamSet&) { return std::nan(""); };
        auto grad = [](const ParamSet& p) { return zero_like(p); };
        CHECK_THROWS_AS(grad_check(single_layer_set(l), loss, grad, 1e-5), NumericError);
    }
}

TEST_CASE("seeded init is bit-identical across runs") {
    auto build = [] {
        Rng rng(42);
        Layer l = Layer::conv2d(4, 8, 3, 2, 1);
        init_layer_params(l, rng);
        return l;
    };
    const Layer a = build();
    const Layer b = build();
    CHECK(a.params[0].bit_equal(b.params[0]));
    CHECK(a.params[1].bit_equal(b.params[1]));
    // weights respect the +-sqrt(6/(fan_in+fan_out)) bound, biases are zero
    const double bound = std::sqrt(6.0 / (3 * 3 * 4 + 3 * 3 * 8));
    for (double w : a.params[0].v) CHECK(std::fabs(w) <= bound);
    for (double z : a.params[1].v) CHECK(z == 0.0);
}

TEST_CASE("weights round-trip bit-exactly through the GZR1 container") {
    Rng rng(77);
    ParamSet p;
    p.branches.push_back({"image_encoder", {Layer::conv2d(1, 8, 3, 2, 1), Layer::relu()}});
    p.branches.push_back({"decoder", {Layer::dense(16, 2)}});
    p.for_each_tensor([&](Tensor& t) {
        for (double& x : t.v) x = rng.uniform(-2, 2);
    });

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "gazelab_serialize_test";
    fs::create_directories(dir);
    const std::string f1 = (dir / "a.gzr").string();
    const std::string f2 = (dir / "b.gzr").string();
    save_params(p, f1);

    ParamSet q = zero_like(p);
    load_params_into(q, f1);
    CHECK(q.bit_equal(p));

    save_params(q, f2);
    std::ifstream a(f1, std::ios::binary), b(f2, std::ios::binary);
    const std::string bytes_a((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    const std::string bytes_b((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(bytes_a == bytes_b);
    CHECK(bytes_a.substr(0, 4) == "GZR1");

    SUBCASE("mismatched skeleton is rejected") {
        ParamSet wrong;
        wrong.branches.push_back({"image_encoder", {Layer::conv2d(1, 8, 3, 2, 1), Layer::relu()}});
        wrong.branches.push_back({"other", {Layer::dense(16, 2)}});
        CHECK_THROWS_AS(load_params_into(wrong, f1), DataError);
    }
    fs::remove_all(dir);
}
