#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "ecf/rng.hpp"
#include "ecf/tensor.hpp"

using namespace ecf;

TEST_CASE("conv output shape follows ((I-F+2P)/S+1) x N") {
    // worked sizes of the two convolution stages
    CHECK(conv_output_shape({8, 1, 0, 1, 25}) == std::pair<std::size_t, std::size_t>{8, 25});
    CHECK(conv_output_shape({4, 1, 0, 1, 25}) == std::pair<std::size_t, std::size_t>{4, 25});
    CHECK(conv_output_shape({1, 1, 0, 1, 1}) == std::pair<std::size_t, std::size_t>{1, 1});
    // non-unit filter and stride
    CHECK(conv_output_shape({8, 2, 0, 2, 3}) == std::pair<std::size_t, std::size_t>{4, 3});
    CHECK(conv_output_shape({8, 3, 1, 1, 7}) == std::pair<std::size_t, std::size_t>{8, 7});
}

TEST_CASE("conv output shape rejects bad geometry") {
    CHECK_THROWS_MATCHES(conv_output_shape({8, 1, 0, 2, 25}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::NonDivisibleStride;
                         }));
    CHECK_THROWS_MATCHES(conv_output_shape({8, 10, 0, 1, 25}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::NegativeExtent;
                         }));
}

TEST_CASE("pool output shape is floor(I/S) x N") {
    CHECK(pool_output_shape(8, 2, 25) == std::pair<std::size_t, std::size_t>{4, 25});
    CHECK(pool_output_shape(4, 2, 25) == std::pair<std::size_t, std::size_t>{2, 25});
    CHECK(pool_output_shape(5, 2, 3) == std::pair<std::size_t, std::size_t>{2, 3});
    CHECK_THROWS_MATCHES(pool_output_shape(1, 2, 25), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                             return e.code() == ErrorCode::PoolTooLarge;
                         }));
}

TEST_CASE("conv/pool chain reproduces the 8->8->4->4->2 walkthrough") {
    auto [c1, n1] = conv_output_shape({8, 1, 0, 1, 25});
    CHECK(c1 == 8);
    auto [p1, n2] = pool_output_shape(c1, 2, n1);
    CHECK(p1 == 4);
    auto [c2, n3] = conv_output_shape({p1, 1, 0, 1, n2});
    CHECK(c2 == 4);
    auto [p2, n4] = pool_output_shape(c2, 2, n3);
    CHECK(p2 == 2);
    CHECK(n4 == 25);
    CHECK(p2 * n4 == 50);
}

TEST_CASE("shape validation") {
    Shape4 zero_dim{0, 1, 1, 1};
    CHECK_THROWS_AS(zero_dim.validate(), Error);
    CHECK_THROWS_AS(Tensor4({2, 2, 2, 2}, std::vector<double>(15, 0.0)), Error);
    CHECK_THROWS_AS(Tensor4({1, 1, 1, 2}, std::vector<double>{1.0, std::nan("")}), Error);
    Shape4 batch50{8, 1, 1, 50};
    CHECK(batch50.elements() == 400);

    Shape4 huge{std::size_t(1) << 32, 1, std::size_t(1) << 33, 2};
    CHECK_THROWS_AS(huge.elements(), Error);
}

TEST_CASE("flatten shapes") {
    CHECK(flatten(Tensor4({2, 1, 25, 50})).rows == 50);
    CHECK(flatten(Tensor4({2, 1, 25, 50})).cols == 50);

    Tensor4 single({1, 1, 1, 1}, {42.0});
    Matrix m = flatten(single);
    CHECK(m.rows == 1);
    CHECK(m.cols == 1);
    CHECK(m.at(0, 0) == 42.0);
}

TEST_CASE("flatten follows the canonical index order") {
    // enumerate (l,h,d,b) by the documented order and compare element by element
    Shape4 shape{2, 1, 3, 4};
    Tensor4 t(shape);
    std::iota(t.data().begin(), t.data().end(), 0.0);
    Matrix m = flatten(t);
    REQUIRE(m.rows == 4);
    REQUIRE(m.cols == 6);
    for (std::size_t b = 0; b < shape.batch; ++b)
        for (std::size_t d = 0; d < shape.depth; ++d)
            for (std::size_t h = 0; h < shape.height; ++h)
                for (std::size_t l = 0; l < shape.length; ++l) {
                    std::size_t col = (d * shape.height + h) * shape.length + l;
                    CHECK(m.at(b, col) == t.at(l, h, d, b));
                }
}

TEST_CASE("flatten preserves values and round-trips", "[property]") {
    Rng rng(2024);
    for (int iter = 0; iter < 50; ++iter) {
        Shape4 shape{1 + rng.next_below(5), 1 + rng.next_below(3), 1 + rng.next_below(4),
                     1 + rng.next_below(6)};
        Tensor4 t(shape);
        for (double& v : t.data()) v = rng.uniform(-10.0, 10.0);

        Matrix m = flatten(t);
        REQUIRE(m.rows * m.cols == t.size());

        auto sorted_t = t.data();
        auto sorted_m = m.values;
        std::sort(sorted_t.begin(), sorted_t.end());
        std::sort(sorted_m.begin(), sorted_m.end());
        CHECK(sorted_t == sorted_m);

        Tensor4 back = unflatten(m, shape);
        CHECK(back.data() == t.data());
    }
}
